//! Random model generation for property tests. Enabled by the `testkit`
//! feature; not part of the stable API.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::diagnostic::Code;
use crate::model::*;

const WORDS: &[&str] = &[
    "model", "transformation", "scope", "UML", "graph", "Petri net", "ATL", "QVT",
    "empirical", "survey", "tool", "metamodel", "\"quoted\"", "back\\slash", "tab\tbed",
    "Übersicht", "naïve", "日本", "x-y", "a/b",
];

fn phrase(rng: &mut impl Rng, unique: usize) -> String {
    let n = rng.random_range(1..=3);
    let mut words: Vec<String> = (0..n).map(|_| WORDS.choose(rng).unwrap().to_string()).collect();
    // The index keeps slugs distinct within one list.
    words.push(format!("{unique}"));
    words.join(" ")
}

fn ident(rng: &mut impl Rng, prefix: &str, unique: usize) -> String {
    const STEMS: &[&str] = &["scope", "kind", "lang", "year", "venue", "tool", "x", "metric"];
    format!("{prefix}{}_{unique}", STEMS.choose(rng).unwrap())
}

/// A random model that passes validation.
pub fn random_model(rng: &mut impl Rng) -> ConfigModel {
    let mut roles = vec![RoleDecl {
        name: "owner".into(),
        rank: Rank::Admin,
        loc: Loc::default(),
    }];
    let extra = rng.random_range(0..4);
    for i in 0..extra {
        let rank = if rng.random_bool(0.5) { Rank::Reviewer } else { Rank::Senior };
        roles.push(RoleDecl {
            name: format!("role_{i}"),
            rank,
            loc: Loc::default(),
        });
    }
    roles.shuffle(rng);
    let senior_roles: Vec<String> = roles
        .iter()
        .filter(|r| r.rank >= Rank::Senior)
        .map(|r| r.name.clone())
        .collect();

    let phases = (0..rng.random_range(1..=3))
        .map(|i| PhaseDecl {
            name: format!("phase_{i}"),
            evidence: *Evidence::ALL.choose(rng).unwrap(),
            loc: Loc::default(),
        })
        .collect();

    let strategy = *ConflictStrategy::ALL.choose(rng).unwrap();
    let conflict = ConflictPolicy {
        strategy,
        arbiter_role: strategy
            .needs_arbiter()
            .then(|| senior_roles.choose(rng).unwrap().clone()),
        loc: Loc::default(),
    };
    let validation = rng.random_bool(0.6).then(|| {
        const PCTS: &[u32] = &[500, 1000, 1250, 2000, 2500, 3300, 3333, 5000, 10000];
        ValidationPolicy {
            percentage: Percentage::from_hundredths(*PCTS.choose(rng).unwrap()),
            target: *[ValidationTarget::Excluded, ValidationTarget::Included, ValidationTarget::All]
                .choose(rng)
                .unwrap(),
            validator_role: senior_roles.choose(rng).unwrap().clone(),
            loc: Loc::default(),
        }
    });

    let exclusion_criteria = (0..rng.random_range(1..=4))
        .map(|i| Criterion {
            text: phrase(rng, i),
            loc: Loc::default(),
        })
        .collect();

    let mut counter = 0;
    let mut list_names = Vec::new();
    let mut categories = random_categories(rng, 1, &mut counter, &mut list_names);
    categories.shuffle(rng);

    ConfigModel {
        project: ProjectDecl {
            name: ident(rng, "p", 0),
            label: phrase(rng, 0),
            roles,
            loc: Loc::default(),
        },
        screening: ScreeningDecl {
            phases,
            assignment: AssignmentPolicy {
                mode: if rng.random_bool(0.8) {
                    AssignmentMode::Automatic
                } else {
                    AssignmentMode::Manual
                },
                reviewers_per_paper: rng.random_range(1..=3),
                loc: Loc::default(),
            },
            conflict,
            validation,
            exclusion_criteria,
            loc: Loc::default(),
        },
        scheme: SchemeDecl {
            categories,
            loc: Loc::default(),
        },
    }
}

/// Earlier list categories (pre-order) with their choices; dependencies only
/// point backwards in declaration order, which always has a valid ordering.
type ListInfo = (String, Vec<String>);

fn random_categories(
    rng: &mut impl Rng,
    depth: usize,
    counter: &mut usize,
    lists: &mut Vec<ListInfo>,
) -> Vec<CategoryDecl> {
    let max = if depth == 1 { 6 } else { 3 };
    let n = rng.random_range(0..=max);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        *counter += 1;
        let name = ident(rng, "c", *counter);
        let kind = match rng.random_range(0..3) {
            0 => CategoryKind::Simple(random_simple(rng)),
            1 => CategoryKind::List {
                choices: (0..rng.random_range(2..=4)).map(|i| phrase(rng, i)).collect(),
            },
            _ => CategoryKind::DynamicList {
                initial_choices: (0..rng.random_range(0..=3)).map(|i| phrase(rng, i)).collect(),
            },
        };
        let depends_on = if kind.has_choices() && !kind_choices(&kind).is_empty() && !lists.is_empty() && rng.random_bool(0.4) {
            let (parent, parent_choices) = lists.choose(rng).unwrap().clone();
            let own = kind_choices(&kind);
            let mut mapping = Vec::new();
            for key in &parent_choices {
                if !rng.random_bool(0.7) {
                    continue;
                }
                let allowed: Vec<String> = own.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
                mapping.push((key.clone(), allowed));
            }
            if mapping.is_empty() {
                mapping.push((parent_choices[0].clone(), vec![own[0].clone()]));
            }
            Some(DependencyRef {
                parent,
                mapping,
                loc: Loc::default(),
            })
        } else {
            None
        };
        if kind.has_choices() && !kind_choices(&kind).is_empty() {
            lists.push((name.clone(), kind_choices(&kind).to_vec()));
        }
        let subcategories = if depth < 3 && rng.random_bool(0.25) {
            random_categories(rng, depth + 1, counter, lists)
        } else {
            Vec::new()
        };
        out.push(CategoryDecl {
            name,
            title: phrase(rng, *counter),
            kind,
            mandatory: rng.random_bool(0.3),
            multiplicity: match rng.random_range(0..4) {
                0 => Multiplicity::Unbounded,
                1 => Multiplicity::Bounded(rng.random_range(2..=5)),
                _ => Multiplicity::Bounded(1),
            },
            subcategories,
            depends_on,
            loc: Loc::default(),
        });
    }
    out
}

fn kind_choices(kind: &CategoryKind) -> &[String] {
    match kind {
        CategoryKind::Simple(_) => &[],
        CategoryKind::List { choices } => choices,
        CategoryKind::DynamicList { initial_choices } => initial_choices,
    }
}

fn random_simple(rng: &mut impl Rng) -> SimpleSpec {
    let value_type = *ValueType::ALL.choose(rng).unwrap();
    let mut spec = SimpleSpec::of(value_type);
    match value_type {
        ValueType::Text => {
            if rng.random_bool(0.5) {
                spec.max_length = Some(rng.random_range(1..=200));
            }
            if rng.random_bool(0.3) {
                spec.pattern = Some((*["^[A-Z]", "\\d+", "^(a|b)*$", "[\"]"].choose(rng).unwrap()).into());
            }
        }
        ValueType::Int | ValueType::Real if rng.random_bool(0.5) => {
            let a = rng.random_range(-400..400) as f64 / 4.0;
            let b = a + rng.random_range(0..400) as f64 / 8.0;
            spec.range = Some(NumRange { min: a, max: b });
        }
        _ => {}
    }
    spec
}

fn visit_mut(cats: &mut [CategoryDecl], f: &mut dyn FnMut(&mut CategoryDecl)) {
    for c in cats {
        f(c);
        visit_mut(&mut c.subcategories, f);
    }
}

fn simple(name: &str, spec: SimpleSpec) -> CategoryDecl {
    CategoryDecl {
        name: name.into(),
        title: name.into(),
        kind: CategoryKind::Simple(spec),
        mandatory: false,
        multiplicity: Multiplicity::default(),
        subcategories: Vec::new(),
        depends_on: None,
        loc: Loc::default(),
    }
}

fn list(name: &str, choices: &[&str], dep: Option<(&str, &str)>) -> CategoryDecl {
    CategoryDecl {
        name: name.into(),
        title: name.into(),
        kind: CategoryKind::List {
            choices: choices.iter().map(|s| s.to_string()).collect(),
        },
        mandatory: false,
        multiplicity: Multiplicity::default(),
        subcategories: Vec::new(),
        depends_on: dep.map(|(parent, key)| DependencyRef {
            parent: parent.into(),
            mapping: vec![(key.into(), vec![choices[0].to_string()])],
            loc: Loc::default(),
        }),
        loc: Loc::default(),
    }
}

/// Breaks one rule of a valid model. Returns the broken model and the code
/// validation must report for it.
pub fn mutate_invalid(mut m: ConfigModel, rng: &mut impl Rng) -> (ConfigModel, Code) {
    let cats = &mut m.scheme.categories;
    let code = match rng.random_range(0..13) {
        0 => {
            let dup = cats.first().map_or("dup".to_string(), |c| c.name.clone());
            cats.push(simple(&dup, SimpleSpec::of(ValueType::Text)));
            if cats.len() == 1 {
                cats.push(simple(&dup, SimpleSpec::of(ValueType::Int)));
            }
            Code::DupName
        }
        1 => {
            for r in &mut m.project.roles {
                if r.rank == Rank::Admin {
                    r.rank = Rank::Senior;
                }
            }
            Code::NoAdmin
        }
        2 => {
            m.project.roles.push(RoleDecl {
                name: "second_owner".into(),
                rank: Rank::Admin,
                loc: Loc::default(),
            });
            Code::MultipleAdmin
        }
        3 => {
            cats.push(list("lonely", &["only"], None));
            Code::EmptyChoices
        }
        4 => {
            let mut spec = SimpleSpec::of(ValueType::Int);
            spec.range = Some(NumRange { min: 5.0, max: 1.0 });
            cats.push(simple("inverted", spec));
            Code::BadRange
        }
        5 => {
            m.screening.conflict = ConflictPolicy {
                strategy: ConflictStrategy::Arbiter,
                arbiter_role: Some("ghost".into()),
                loc: Loc::default(),
            };
            Code::UnknownRole
        }
        6 => {
            cats.push(list("orphan", &["a", "b"], Some(("missing_parent", "a"))));
            Code::DepUnresolved
        }
        7 => {
            cats.push(list("loop_a", &["a", "b"], Some(("loop_b", "a"))));
            cats.push(list("loop_b", &["a", "b"], Some(("loop_a", "a"))));
            Code::DepCycle
        }
        8 => {
            let pct = if rng.random_bool(0.5) { 0 } else { 15_000 };
            let role = m
                .project
                .roles
                .iter()
                .find(|r| r.rank >= Rank::Senior)
                .unwrap()
                .name
                .clone();
            m.screening.validation = Some(ValidationPolicy {
                percentage: Percentage::from_hundredths(pct),
                target: ValidationTarget::Excluded,
                validator_role: role,
                loc: Loc::default(),
            });
            Code::BadPercent
        }
        9 => {
            let dup = m.screening.phases[0].clone();
            m.screening.phases.push(dup);
            Code::DupName
        }
        10 => {
            m.project.name = "Bad_Name".into();
            Code::BadIdent
        }
        11 => {
            let mut deepest = simple("deep_5", SimpleSpec::of(ValueType::Bool));
            for level in (0..5).rev() {
                let mut outer = simple(&format!("deep_{level}"), SimpleSpec::of(ValueType::Bool));
                outer.subcategories.push(deepest);
                deepest = outer;
            }
            cats.push(deepest);
            Code::TooDeep
        }
        _ => {
            let mut done = false;
            visit_mut(cats, &mut |c| {
                if let CategoryKind::Simple(s) = &mut c.kind {
                    if !done && s.value_type != ValueType::Text {
                        s.max_length = Some(10);
                        done = true;
                    }
                }
            });
            if !done {
                let mut spec = SimpleSpec::of(ValueType::Bool);
                spec.max_length = Some(10);
                cats.push(simple("flag_with_length", spec));
            }
            Code::BadConstraint
        }
    };
    (m, code)
}
