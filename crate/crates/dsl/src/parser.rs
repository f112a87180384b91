//! Recursive-descent parser for `.relis` sources. One token of lookahead;
//! keywords are contextual, so any keyword may also be used as a name.

use crate::diagnostic::{Code, Diagnostic};
use crate::lexer::{tokenize, Tok, Token};
use crate::model::*;

/// Deepest `{` nesting the parser follows before giving up. Validation has a
/// much lower limit for categories; this one only protects the stack.
const MAX_PARSE_NESTING: usize = 64;

/// Parses a source text into a model. Never panics; on failure returns at
/// least one error diagnostic.
pub fn parse(src: &SourceText) -> Result<ConfigModel, Vec<Diagnostic>> {
    parse_str(&src.content)
}

/// Like [`parse`] but starting from raw bytes, which must be UTF-8.
pub fn parse_bytes(bytes: &[u8]) -> Result<ConfigModel, Vec<Diagnostic>> {
    match std::str::from_utf8(bytes) {
        Ok(s) => parse_str(s),
        Err(e) => {
            let valid = &bytes[..e.valid_up_to()];
            let text = String::from_utf8_lossy(valid);
            let line = text.matches('\n').count() as u32 + 1;
            let column = text.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u32 + 1;
            Err(vec![Diagnostic::error(
                Code::Encoding,
                Loc::new(line, column),
                "source is not valid UTF-8",
            )])
        }
    }
}

pub fn parse_str(content: &str) -> Result<ConfigModel, Vec<Diagnostic>> {
    let tokens = tokenize(content).map_err(|d| vec![d])?;
    let mut p = Parser {
        tokens,
        pos: 0,
        open: Vec::new(),
    };
    p.model().map_err(|d| vec![d])
}

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    /// Locations of currently unclosed `{`.
    open: Vec<Loc>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn loc(&self) -> Loc {
        self.tokens[self.pos].loc
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        let found = self.peek();
        if *found == Tok::Eof {
            if let Some(&brace) = self.open.last() {
                return Diagnostic::error(
                    Code::Syntax,
                    brace,
                    format!("`{{` opened here is never closed (expected {expected})"),
                );
            }
            return Diagnostic::error(
                Code::Eof,
                self.loc(),
                format!("unexpected end of input, expected {expected}"),
            );
        }
        Diagnostic::error(
            Code::Syntax,
            self.loc(),
            format!("expected {expected}, found {}", found.describe()),
        )
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<Loc> {
        if *self.peek() == tok {
            Ok(self.next().loc)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<Loc> {
        if self.at_keyword(kw) {
            Ok(self.next().loc)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Loc)> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((s, self.next().loc)),
            _ => Err(self.unexpected(what)),
        }
    }

    fn string(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.next();
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn uint(&mut self, what: &str) -> PResult<u32> {
        match self.peek().clone() {
            Tok::Number(n) => match n.parse::<u32>() {
                Ok(v) => {
                    self.next();
                    Ok(v)
                }
                Err(_) => Err(Diagnostic::error(
                    Code::Syntax,
                    self.loc(),
                    format!("expected {what}, found number `{n}`"),
                )),
            },
            _ => Err(self.unexpected(what)),
        }
    }

    fn number(&mut self, what: &str) -> PResult<f64> {
        match self.peek().clone() {
            Tok::Number(n) => {
                let loc = self.loc();
                self.next();
                n.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Diagnostic::error(Code::Syntax, loc, format!("number `{n}` is out of range")))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn open_brace(&mut self) -> PResult<()> {
        let loc = self.expect(Tok::LBrace)?;
        if self.open.len() >= MAX_PARSE_NESTING {
            return Err(Diagnostic::error(Code::Syntax, loc, "blocks are nested too deeply"));
        }
        self.open.push(loc);
        Ok(())
    }

    /// Consumes `}` if it is next, closing the innermost block.
    fn close_brace(&mut self) -> bool {
        if self.eat(&Tok::RBrace) {
            self.open.pop();
            true
        } else {
            false
        }
    }

    fn model(&mut self) -> PResult<ConfigModel> {
        let project_loc = self.keyword("project")?;
        let (name, _) = self.ident("project name")?;
        let label = self.string("project label")?;

        self.keyword("roles")?;
        self.open_brace()?;
        let mut roles = Vec::new();
        while !self.close_brace() {
            let (name, loc) = self.ident("role name or `}`")?;
            let (rank_kw, _) = self.ident("role rank")?;
            let rank = Rank::from_keyword(&rank_kw).ok_or_else(|| {
                self.previous_error(format!(
                    "unknown rank `{rank_kw}`, expected reviewer, senior or admin"
                ))
            })?;
            roles.push(RoleDecl { name, rank, loc });
        }

        let screening = self.screening()?;
        let scheme = self.scheme()?;
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("end of input"));
        }
        Ok(ConfigModel {
            project: ProjectDecl {
                name,
                label,
                roles,
                loc: project_loc,
            },
            screening,
            scheme,
        })
    }

    fn previous_error(&self, message: String) -> Diagnostic {
        let loc = self.tokens[self.pos.saturating_sub(1)].loc;
        Diagnostic::error(Code::Syntax, loc, message)
    }

    fn screening(&mut self) -> PResult<ScreeningDecl> {
        let loc = self.keyword("screening")?;
        self.open_brace()?;

        self.keyword("phases")?;
        self.open_brace()?;
        let mut phases = Vec::new();
        while !self.close_brace() {
            let (name, loc) = self.ident("phase name or `}`")?;
            let (ev, _) = self.ident("phase evidence")?;
            let evidence = Evidence::from_keyword(&ev).ok_or_else(|| {
                self.previous_error(format!(
                    "unknown evidence `{ev}`, expected metadata, abstract or fulltext"
                ))
            })?;
            phases.push(PhaseDecl { name, evidence, loc });
        }

        let assign_loc = self.keyword("assign")?;
        let (mode_kw, _) = self.ident("`automatic` or `manual`")?;
        let mode = match mode_kw.as_str() {
            "automatic" => AssignmentMode::Automatic,
            "manual" => AssignmentMode::Manual,
            other => {
                return Err(self.previous_error(format!(
                    "unknown assignment mode `{other}`, expected automatic or manual"
                )))
            }
        };
        let reviewers_per_paper = self.uint("number of reviewers per paper")?;
        let assignment = AssignmentPolicy {
            mode,
            reviewers_per_paper,
            loc: assign_loc,
        };

        let conflict_loc = self.keyword("conflict")?;
        let (strategy_kw, _) = self.ident("conflict strategy")?;
        let strategy = ConflictStrategy::ALL
            .into_iter()
            .find(|s| s.keyword() == strategy_kw)
            .ok_or_else(|| {
                self.previous_error(format!(
                    "unknown conflict strategy `{strategy_kw}`, expected unanimity, majority or arbiter"
                ))
            })?;
        let arbiter_role = if strategy.needs_arbiter() {
            self.keyword("by")?;
            Some(self.ident("arbiter role")?.0)
        } else {
            None
        };
        let conflict = ConflictPolicy {
            strategy,
            arbiter_role,
            loc: conflict_loc,
        };

        let validation = if self.at_keyword("validation") {
            Some(self.validation()?)
        } else {
            None
        };

        self.keyword("exclusion")?;
        self.open_brace()?;
        let mut exclusion_criteria = Vec::new();
        while !self.close_brace() {
            let loc = self.loc();
            let text = self.string("exclusion criterion or `}`")?;
            exclusion_criteria.push(Criterion { text, loc });
        }

        if !self.close_brace() {
            return Err(self.unexpected("`}` closing `screening`"));
        }
        Ok(ScreeningDecl {
            phases,
            assignment,
            conflict,
            validation,
            exclusion_criteria,
            loc,
        })
    }

    fn validation(&mut self) -> PResult<ValidationPolicy> {
        let loc = self.keyword("validation")?;
        let percentage = self.percentage()?;
        self.expect(Tok::Percent)?;
        self.keyword("of")?;
        let (target_kw, _) = self.ident("validation target")?;
        let target = match target_kw.as_str() {
            "excluded" => ValidationTarget::Excluded,
            "included" => ValidationTarget::Included,
            "all" => ValidationTarget::All,
            other => {
                return Err(self.previous_error(format!(
                    "unknown validation target `{other}`, expected excluded, included or all"
                )))
            }
        };
        self.keyword("by")?;
        let (validator_role, _) = self.ident("validator role")?;
        Ok(ValidationPolicy {
            percentage,
            target,
            validator_role,
            loc,
        })
    }

    /// Reads a non-negative decimal with at most two fractional digits.
    fn percentage(&mut self) -> PResult<Percentage> {
        let Tok::Number(n) = self.peek().clone() else {
            return Err(self.unexpected("percentage"));
        };
        let loc = self.loc();
        let bad = || Diagnostic::error(Code::Syntax, loc, format!("`{n}` is not a percentage with at most two decimals"));
        let (int, frac) = n.split_once('.').unwrap_or((&n, ""));
        if int.starts_with('-') || frac.len() > 2 {
            return Err(bad());
        }
        let int: u32 = int.parse().map_err(|_| bad())?;
        let frac: u32 = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<2}").parse().map_err(|_| bad())?
        };
        let hundredths = int.checked_mul(100).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
        self.next();
        Ok(Percentage::from_hundredths(hundredths))
    }

    fn scheme(&mut self) -> PResult<SchemeDecl> {
        let loc = self.keyword("classification")?;
        self.open_brace()?;
        let categories = self.categories()?;
        Ok(SchemeDecl { categories, loc })
    }

    /// Categories up to and including the closing `}` of the enclosing block.
    fn categories(&mut self) -> PResult<Vec<CategoryDecl>> {
        let mut out = Vec::new();
        while !self.close_brace() {
            out.push(self.category()?);
        }
        Ok(out)
    }

    fn category(&mut self) -> PResult<CategoryDecl> {
        let (kind_kw, loc) = match self.peek().clone() {
            Tok::Ident(s) if matches!(s.as_str(), "simple" | "list" | "dynamiclist") => {
                (s, self.next().loc)
            }
            _ => return Err(self.unexpected("`simple`, `list`, `dynamiclist` or `}`")),
        };
        let (name, _) = self.ident("category name")?;
        let title = self.string("category title")?;
        self.expect(Tok::Colon)?;

        let kind = match kind_kw.as_str() {
            "simple" => CategoryKind::Simple(self.simple_spec()?),
            "list" => CategoryKind::List {
                choices: self.choice_list()?,
            },
            _ => CategoryKind::DynamicList {
                initial_choices: self.choice_list()?,
            },
        };

        let depends_on = if self.at_keyword("depends") {
            Some(self.dependency()?)
        } else {
            None
        };
        let mandatory = self.eat(&Tok::Star);
        let multiplicity = if self.eat(&Tok::LBracket) {
            let n = self.uint("multiplicity")?;
            self.expect(Tok::RBracket)?;
            Multiplicity::from_suffix(n)
        } else {
            Multiplicity::default()
        };
        let subcategories = if *self.peek() == Tok::LBrace {
            self.open_brace()?;
            self.categories()?
        } else {
            Vec::new()
        };
        Ok(CategoryDecl {
            name,
            title,
            kind,
            mandatory,
            multiplicity,
            subcategories,
            depends_on,
            loc,
        })
    }

    fn simple_spec(&mut self) -> PResult<SimpleSpec> {
        let (ty, _) = self.ident("value type")?;
        let value_type = ValueType::from_keyword(&ty).ok_or_else(|| {
            self.previous_error(format!(
                "unknown value type `{ty}`, expected text, bool, int, real or date"
            ))
        })?;
        let mut spec = SimpleSpec::of(value_type);
        if self.eat(&Tok::LParen) {
            spec.max_length = Some(self.uint("maximum length")?);
            self.expect(Tok::RParen)?;
        }
        loop {
            if self.at_keyword("pattern") {
                if spec.pattern.is_some() {
                    return Err(Diagnostic::error(Code::Syntax, self.loc(), "`pattern` given twice"));
                }
                self.next();
                spec.pattern = Some(self.string("regular expression")?);
            } else if self.at_keyword("range") {
                if spec.range.is_some() {
                    return Err(Diagnostic::error(Code::Syntax, self.loc(), "`range` given twice"));
                }
                self.next();
                self.expect(Tok::LParen)?;
                let min = self.number("range minimum")?;
                self.expect(Tok::Comma)?;
                let max = self.number("range maximum")?;
                self.expect(Tok::RParen)?;
                spec.range = Some(NumRange { min, max });
            } else {
                return Ok(spec);
            }
        }
    }

    fn choice_list(&mut self) -> PResult<Vec<String>> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            out.push(self.string("choice")?);
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            self.expect(Tok::Comma)?;
        }
    }

    fn dependency(&mut self) -> PResult<DependencyRef> {
        let loc = self.keyword("depends")?;
        self.keyword("on")?;
        let (parent, _) = self.ident("parent category")?;
        self.expect(Tok::LParen)?;
        let mut mapping = Vec::new();
        loop {
            let key = self.string("parent choice")?;
            self.expect(Tok::Arrow)?;
            self.open_brace()?;
            let mut allowed = Vec::new();
            if !self.close_brace() {
                loop {
                    allowed.push(self.string("allowed choice")?);
                    if self.close_brace() {
                        break;
                    }
                    self.expect(Tok::Comma)?;
                }
            }
            mapping.push((key, allowed));
            if self.eat(&Tok::RParen) {
                break;
            }
            self.expect(Tok::Comma)?;
        }
        Ok(DependencyRef {
            parent,
            mapping,
            loc,
        })
    }
}
