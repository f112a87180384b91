use serde::{Deserialize, Serialize};

use super::{audit, from_payload, require_rank, settings, to_payload, PAPER};
use crate::error::{Error, Result};
use crate::ids::{ProjectId, RecordId, UserId};
use crate::store::{Store, Tx};

/// Exact header of CSV imports.
pub const CSV_HEADER: [&str; 7] = ["bibkey", "title", "authors", "venue", "year", "abstract", "link"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportFormat {
    Csv,
    Bibtex,
}

impl ImportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(ImportFormat::Csv),
            "bibtex" | "bib" => Some(ImportFormat::Bibtex),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PaperData {
    #[serde(default)]
    pub bibkey: String,
    pub title: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub venue: String,
    pub year: i64,
    #[serde(rename = "abstract", default, skip_serializing_if = "Option::is_none")]
    pub abstract_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<String>,
}

impl PaperData {
    fn check(&self) -> std::result::Result<(), String> {
        if self.title.trim().is_empty() {
            return Err("title required".into());
        }
        if !(1900..=2100).contains(&self.year) {
            return Err(format!("year {} outside 1900..2100", self.year));
        }
        Ok(())
    }

    fn title_key(&self) -> (String, i64) {
        let norm: String = self
            .title
            .to_lowercase()
            .chars()
            .map(|c| if c.is_alphanumeric() { c } else { ' ' })
            .collect::<String>()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        (norm, self.year)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportReport {
    pub imported: usize,
    pub rejected: Vec<Rejection>,
    pub ids: Vec<RecordId>,
}

/// Stores one paper, rejecting duplicates by bibkey or by normalized
/// title and year.
pub fn add_paper(tx: &mut Tx<'_>, mut paper: PaperData) -> Result<RecordId> {
    paper.check().map_err(Error::Format)?;
    paper.bibkey = paper.bibkey.trim().to_string();
    reject_duplicate(tx, &paper, None)?;
    if paper.bibkey.is_empty() {
        let n = tx.records_of(PAPER).count();
        let mut i = n + 1;
        while tx.records_of(PAPER).any(|r| r.str("bibkey") == Some(&format!("paper{i}"))) {
            i += 1;
        }
        paper.bibkey = format!("paper{i}");
    }
    tx.add_record(PAPER, None, to_payload(&paper), Vec::new())
}

fn reject_duplicate(tx: &Tx<'_>, paper: &PaperData, except: Option<RecordId>) -> Result<()> {
    let key = paper.title_key();
    for r in tx.records_of(PAPER).filter(|r| Some(r.id) != except) {
        let other: PaperData = from_payload(r)?;
        if !paper.bibkey.is_empty() && other.bibkey == paper.bibkey {
            return Err(Error::Duplicate(format!("bibkey `{}`", paper.bibkey)));
        }
        if other.title_key() == key {
            return Err(Error::Duplicate(format!("title `{}` ({})", paper.title, paper.year)));
        }
    }
    Ok(())
}

fn paper_record(tx: &Tx<'_>, id: RecordId) -> Result<()> {
    match tx.record(id) {
        Ok(r) if r.element_id == PAPER => Ok(()),
        _ => Err(Error::not_found(format!("paper {id}"))),
    }
}

/// Replaces the metadata of a paper. The bibkey cannot be cleared.
pub fn modify_paper(tx: &mut Tx<'_>, id: RecordId, expected_version: u32, mut paper: PaperData) -> Result<u32> {
    paper_record(tx, id)?;
    paper.check().map_err(Error::Format)?;
    paper.bibkey = paper.bibkey.trim().to_string();
    if paper.bibkey.is_empty() {
        return Err(Error::Format("bibkey required".into()));
    }
    reject_duplicate(tx, &paper, Some(id))?;
    tx.modify_record(id, expected_version, to_payload(&paper), Vec::new())
}

/// Removes a paper that no workflow record refers to.
pub fn remove_paper(tx: &mut Tx<'_>, id: RecordId) -> Result<()> {
    paper_record(tx, id)?;
    let referenced = tx.records.values().any(|r| {
        r.paper_id == Some(id) || (r.element_id.starts_with(crate::store::BUILTIN_PREFIX) && r.u64("paper") == Some(id.0))
    });
    if referenced {
        return Err(Error::InUse(format!("paper {id}")));
    }
    tx.remove_record(id).map(|_| ())
}

/// Imports a corpus. Valid rows are committed even when others are
/// rejected; only an unreadable payload fails as a whole.
pub fn import_papers(
    store: &Store,
    project: ProjectId,
    actor: UserId,
    payload: &str,
    format: ImportFormat,
) -> Result<ImportReport> {
    let rows = match format {
        ImportFormat::Csv => parse_csv(payload)?,
        ImportFormat::Bibtex => parse_bibtex(payload)?,
    };
    store.transact(project, Some(actor), |tx| {
        settings(tx)?;
        require_rank(tx, actor, relis_dsl::Rank::Admin)?;
        let mut report = ImportReport::default();
        for (line, row) in rows {
            let outcome = row.and_then(|p| match add_paper(tx, p) {
                Ok(id) => Ok(id),
                Err(Error::Format(m)) => Err(m),
                Err(Error::Duplicate(m)) => Err(format!("duplicate {m}")),
                Err(e) => Err(e.to_string()),
            });
            match outcome {
                Ok(id) => {
                    report.imported += 1;
                    report.ids.push(id);
                }
                Err(reason) => report.rejected.push(Rejection { line, reason }),
            }
        }
        audit(tx, "import_papers", None, None, report.imported)?;
        Ok(report)
    })
}

type Row = (u64, std::result::Result<PaperData, String>);

fn parse_csv(payload: &str) -> Result<Vec<Row>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(payload.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if header.iter().map(str::trim).ne(CSV_HEADER) {
        return Err(Error::Format(format!("expected header `{}`", CSV_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if rec.len() != CSV_HEADER.len() {
            rows.push((line, Err(format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()))));
            continue;
        }
        let opt = |s: &str| Some(s.trim().to_string()).filter(|s| !s.is_empty());
        let year = match rec[4].trim().parse::<i64>() {
            Ok(y) => y,
            Err(_) if rec[4].trim().is_empty() => {
                rows.push((line, Err("year required".into())));
                continue;
            }
            Err(_) => {
                rows.push((line, Err(format!("year `{}` is not a number", rec[4].trim()))));
                continue;
            }
        };
        let paper = PaperData {
            bibkey: rec[0].trim().to_string(),
            title: rec[1].trim().to_string(),
            authors: rec[2]
                .split(';')
                .map(str::trim)
                .filter(|a| !a.is_empty())
                .map(str::to_string)
                .collect(),
            venue: rec[3].trim().to_string(),
            year,
            abstract_text: opt(&rec[5]),
            link: opt(&rec[6]),
        };
        rows.push((line, paper.check().map(|_| paper)));
    }
    Ok(rows)
}

/// Parses the supported BibTeX subset. Entries of other types, or lacking
/// required fields, become per-row rejections.
pub fn parse_bibtex(payload: &str) -> Result<Vec<Row>> {
    let chars: Vec<char> = payload.chars().collect();
    let mut rows = Vec::new();
    let mut i = 0;
    let mut line = 1u64;
    while i < chars.len() {
        if chars[i] != '@' {
            if chars[i] == '\n' {
                line += 1;
            }
            i += 1;
            continue;
        }
        let start_line = line;
        i += 1;
        let ty_start = i;
        while i < chars.len() && chars[i].is_ascii_alphabetic() {
            i += 1;
        }
        let ty: String = chars[ty_start..i].iter().collect::<String>().to_lowercase();
        while i < chars.len() && chars[i].is_whitespace() {
            if chars[i] == '\n' {
                line += 1;
            }
            i += 1;
        }
        if i >= chars.len() || (chars[i] != '{' && chars[i] != '(') {
            return Err(Error::Format(format!("line {start_line}: expected `{{` after @{ty}")));
        }
        let close = if chars[i] == '{' { '}' } else { ')' };
        // Find the matching delimiter of the entry body.
        let body_start = i + 1;
        let mut depth = 0i32;
        let mut j = i;
        loop {
            if j >= chars.len() {
                return Err(Error::Format(format!("line {start_line}: unterminated entry")));
            }
            match chars[j] {
                '{' | '(' if j == i => depth = 1,
                '{' => depth += 1,
                '}' if depth > 1 => depth -= 1,
                c if c == close && depth == 1 => break,
                '\n' => line += 1,
                _ => {}
            }
            j += 1;
        }
        let body: String = chars[body_start..j].iter().collect();
        i = j + 1;
        if matches!(ty.as_str(), "comment" | "preamble" | "string") {
            continue;
        }
        let entry = parse_entry(&ty, &body);
        rows.push((start_line, entry));
    }
    if rows.is_empty() && !payload.trim().is_empty() {
        return Err(Error::Format("no BibTeX entries found".into()));
    }
    Ok(rows)
}

fn parse_entry(ty: &str, body: &str) -> std::result::Result<PaperData, String> {
    if !matches!(ty, "article" | "inproceedings" | "book") {
        return Err(format!("unsupported entry type @{ty}"));
    }
    let (key, rest) = body.split_once(',').unwrap_or((body, ""));
    let fields = parse_fields(rest)?;
    let get = |k: &str| {
        fields
            .iter()
            .find(|(n, _)| n == k)
            .map(|(_, v)| v.clone())
            .filter(|v| !v.is_empty())
    };
    let year = match get("year") {
        Some(y) => y.parse::<i64>().map_err(|_| format!("year `{y}` is not a number"))?,
        None => return Err("year required".into()),
    };
    let paper = PaperData {
        bibkey: key.trim().to_string(),
        title: get("title").unwrap_or_default(),
        authors: get("author")
            .map(|a| a.split(" and ").map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default(),
        venue: get("booktitle").or_else(|| get("journal")).unwrap_or_default(),
        year,
        abstract_text: get("abstract"),
        link: get("url").or_else(|| get("doi").map(|d| format!("https://doi.org/{d}"))),
    };
    paper.check()?;
    Ok(paper)
}

fn parse_fields(s: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        while i < chars.len() && (chars[i].is_whitespace() || chars[i] == ',') {
            i += 1;
        }
        if i >= chars.len() {
            return Ok(out);
        }
        let name_start = i;
        while i < chars.len() && chars[i] != '=' {
            i += 1;
        }
        if i >= chars.len() {
            return Err("field without `=`".into());
        }
        let name: String = chars[name_start..i].iter().collect::<String>().trim().to_lowercase();
        i += 1;
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        let mut value = String::new();
        match chars.get(i) {
            Some('{') => {
                let mut depth = 0;
                while i < chars.len() {
                    match chars[i] {
                        '{' => {
                            if depth > 0 {
                                value.push('{');
                            }
                            depth += 1;
                        }
                        '}' => {
                            depth -= 1;
                            if depth == 0 {
                                i += 1;
                                break;
                            }
                            value.push('}');
                        }
                        c => value.push(c),
                    }
                    i += 1;
                }
            }
            Some('"') => {
                i += 1;
                while i < chars.len() && chars[i] != '"' {
                    value.push(chars[i]);
                    i += 1;
                }
                i += 1;
            }
            _ => {
                while i < chars.len() && chars[i] != ',' {
                    value.push(chars[i]);
                    i += 1;
                }
            }
        }
        let value = value
            .replace(['{', '}'], "")
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        out.push((name, value));
    }
}
