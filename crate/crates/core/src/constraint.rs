//! Constraint language for ANOVA mean structures.
//!
//! A model string lists relations among group means `mu1..muJ`:
//!
//! ```text
//! mu2 < mu1 < mu4 < {mu3 = mu5}
//! {mu1, mu3} > {mu2, mu4, mu5}
//! mu1 = mu2 = mu3 = mu4 = mu5
//! mu1, mu2, mu3, mu4, mu5
//! ```
//!
//! Top-level commas separate independent chains. Inside a chain, `<` and `>`
//! relate adjacent segments and `=` merges terms into one equality class.
//! Braces hold a comma-separated set of terms; a set on either side of an
//! inequality expands to every pairwise relation. Groups never mentioned are
//! unconstrained singletons.
//!
//! Parsed models keep group indices 0-based internally. Equality classes are
//! ordered by their lowest member, so group 1 always lands in class 0, the
//! baseline (intercept) class.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("malformed model string at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("group index mu{index} out of range 1..={groups}")]
    GroupOutOfRange { index: usize, groups: usize },
    #[error("group mu{0} is declared in two different equality classes")]
    ConflictingEquality(usize),
    #[error("order relation contains a cycle through mu{0}")]
    Cycle(usize),
    #[error("model needs at least one group")]
    NoGroups,
    #[error("delta has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("group {group} is empty")]
    EmptyGroup { group: usize },
}

/// A validated constraint model: an equality partition of the groups plus a
/// strict partial order over the equality classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintModel {
    name: String,
    groups: usize,
    /// Members of each class (0-based group indices, sorted); classes sorted
    /// by lowest member.
    classes: Vec<Vec<usize>>,
    class_of_group: Vec<usize>,
    /// Transitively closed strict order: `(a, b)` means class `a` < class `b`.
    order: BTreeSet<(usize, usize)>,
}

impl ConstraintModel {
    /// Parse `text` for a design with `groups` groups.
    pub fn parse(name: &str, text: &str, groups: usize) -> Result<Self, ConstraintError> {
        parse_model_spec(name, text, groups)
    }

    /// The unconstrained model over `groups` groups.
    pub fn encompassing(name: &str, groups: usize) -> Self {
        let classes = (0..groups).map(|g| vec![g]).collect();
        Self {
            name: name.to_string(),
            groups,
            classes,
            class_of_group: (0..groups).collect(),
            order: BTreeSet::new(),
        }
    }

    /// The model with every mean equal.
    pub fn null(name: &str, groups: usize) -> Self {
        Self {
            name: name.to_string(),
            groups,
            classes: vec![(0..groups).collect()],
            class_of_group: vec![0; groups],
            order: BTreeSet::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_of_group(&self, group: usize) -> usize {
        self.class_of_group[group]
    }

    pub fn order(&self) -> &BTreeSet<(usize, usize)> {
        &self.order
    }

    pub fn is_null(&self) -> bool {
        self.classes.len() == 1 && self.order.is_empty()
    }

    pub fn is_encompassing(&self) -> bool {
        self.classes.len() == self.groups && self.order.is_empty()
    }

    /// True when the model carries no inequality constraints.
    pub fn is_unordered(&self) -> bool {
        self.order.is_empty()
    }

    /// The equality-collapsed, inequality-free design for this model.
    pub fn encompassing_design(&self) -> EncompassingDesign {
        encompassing_of(self)
    }

    pub fn region(&self) -> InequalityRegion {
        InequalityRegion {
            q: self.classes.len(),
            comparisons: self.order.iter().copied().collect(),
        }
    }

    /// Pairs of the transitive reduction, used for printing.
    fn cover_relations(&self) -> Vec<(usize, usize)> {
        self.order
            .iter()
            .copied()
            .filter(|&(a, b)| {
                !(0..self.classes.len())
                    .any(|m| self.order.contains(&(a, m)) && self.order.contains(&(m, b)))
            })
            .collect()
    }

    fn class_label(&self, class: usize) -> String {
        let members = &self.classes[class];
        if members.len() == 1 {
            format!("mu{}", members[0] + 1)
        } else {
            let inner: Vec<String> = members.iter().map(|g| format!("mu{}", g + 1)).collect();
            format!("{{{}}}", inner.join(" = "))
        }
    }
}

/// Canonical text form; parsing it back yields an identical model.
impl fmt::Display for ConstraintModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        let mut mentioned = vec![false; self.classes.len()];
        for (a, b) in self.cover_relations() {
            mentioned[a] = true;
            mentioned[b] = true;
            parts.push(format!("{} < {}", self.class_label(a), self.class_label(b)));
        }
        for (c, seen) in mentioned.iter().enumerate() {
            if !seen {
                parts.push(self.class_label(c));
            }
        }
        write!(f, "{}", parts.join(", "))
    }
}

/// Location structure of the encompassing model of a constrained model:
/// one intercept (the baseline class) plus one effect per remaining class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncompassingDesign {
    pub q: usize,
    pub class_of_group: Vec<usize>,
    pub baseline: usize,
    /// 1-based label (lowest member) of each non-baseline class, in δ order.
    pub delta_labels: Vec<usize>,
}

impl EncompassingDesign {
    pub fn delta_dim(&self) -> usize {
        self.q - 1
    }

    pub fn groups(&self) -> usize {
        self.class_of_group.len()
    }
}

/// Strict pairwise comparisons over collapsed class values, where the
/// baseline class has value 0 and class `k >= 1` has value `delta[k - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InequalityRegion {
    q: usize,
    comparisons: Vec<(usize, usize)>,
}

impl InequalityRegion {
    pub fn comparisons(&self) -> &[(usize, usize)] {
        &self.comparisons
    }

    pub fn is_unconstrained(&self) -> bool {
        self.comparisons.is_empty()
    }

    pub fn delta_dim(&self) -> usize {
        self.q - 1
    }

    /// Membership without a dimension check, for sampler hot loops.
    #[inline]
    pub fn contains_unchecked(&self, delta: &[f64]) -> bool {
        let value = |c: usize| if c == 0 { 0.0 } else { delta[c - 1] };
        self.comparisons.iter().all(|&(a, b)| value(a) < value(b))
    }

    pub fn contains(&self, delta: &[f64]) -> Result<bool, ConstraintError> {
        if delta.len() != self.delta_dim() {
            return Err(ConstraintError::DimensionMismatch {
                expected: self.delta_dim(),
                got: delta.len(),
            });
        }
        Ok(self.contains_unchecked(delta))
    }
}

pub fn encompassing_of(model: &ConstraintModel) -> EncompassingDesign {
    EncompassingDesign {
        q: model.classes.len(),
        class_of_group: model.class_of_group.clone(),
        baseline: 0,
        delta_labels: model.classes[1..].iter().map(|c| c[0] + 1).collect(),
    }
}

/// Design matrix with rows ordered group by group. Column 0 is the intercept;
/// column `k` flags units whose group lies in class `k`.
pub fn build_design(
    design: &EncompassingDesign,
    group_sizes: &[usize],
) -> Result<DMatrix<f64>, ConstraintError> {
    if group_sizes.len() != design.groups() {
        return Err(ConstraintError::DimensionMismatch {
            expected: design.groups(),
            got: group_sizes.len(),
        });
    }
    if let Some(g) = group_sizes.iter().position(|&n| n == 0) {
        return Err(ConstraintError::EmptyGroup { group: g + 1 });
    }
    let n: usize = group_sizes.iter().sum();
    let mut z = DMatrix::zeros(n, design.q);
    let mut row = 0;
    for (g, &size) in group_sizes.iter().enumerate() {
        let class = design.class_of_group[g];
        for _ in 0..size {
            z[(row, 0)] = 1.0;
            if class != design.baseline {
                z[(row, class)] = 1.0;
            }
            row += 1;
        }
    }
    Ok(z)
}

pub fn region_contains(model: &ConstraintModel, delta: &[f64]) -> Result<bool, ConstraintError> {
    model.region().contains(delta)
}

// ---------------------------------------------------------------------------
// Parser

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Group(usize),
    Less,
    Greater,
    Equal,
    Comma,
    LBrace,
    RBrace,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ConstraintError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, ch)) = chars.peek() {
        let simple = match ch {
            '<' => Some(Tok::Less),
            '>' => Some(Tok::Greater),
            '=' => Some(Tok::Equal),
            ',' => Some(Tok::Comma),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push((pos, tok));
            chars.next();
            continue;
        }
        if ch.is_whitespace() {
            chars.next();
            continue;
        }
        // mu<digits> or μ<digits>
        let rest = &text[pos..];
        let prefix = if rest.starts_with("mu") {
            2
        } else if rest.starts_with('μ') {
            'μ'.len_utf8()
        } else {
            return Err(ConstraintError::Syntax {
                pos,
                msg: format!("unexpected character {ch:?}"),
            });
        };
        let digits: String = rest[prefix..]
            .chars()
            .take_while(|c| c.is_ascii_digit())
            .collect();
        if digits.is_empty() {
            return Err(ConstraintError::Syntax {
                pos,
                msg: "expected a group number after 'mu'".into(),
            });
        }
        let index: usize = digits.parse().map_err(|_| ConstraintError::Syntax {
            pos,
            msg: format!("group number {digits} too large"),
        })?;
        out.push((pos, Tok::Group(index)));
        let consumed = prefix + digits.len();
        while let Some(&(p, _)) = chars.peek() {
            if p < pos + consumed {
                chars.next();
            } else {
                break;
            }
        }
    }
    Ok(out)
}

/// A term is either a single group or a brace set; `equalities` holds the
/// equality sets declared inside it.
#[derive(Debug, Default)]
struct Term {
    groups: Vec<usize>,
    equalities: Vec<Vec<usize>>,
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    at: usize,
    end: usize,
    groups: usize,
}

#[derive(Debug, Default)]
struct Statements {
    equalities: Vec<Vec<usize>>,
    relations: Vec<(usize, usize)>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<Tok> {
        self.toks.get(self.at).map(|t| t.1)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.0)
    }

    fn error<T>(&self, msg: &str) -> Result<T, ConstraintError> {
        Err(ConstraintError::Syntax {
            pos: self.pos(),
            msg: msg.to_string(),
        })
    }

    fn group(&self, index: usize) -> Result<usize, ConstraintError> {
        if index == 0 || index > self.groups {
            return Err(ConstraintError::GroupOutOfRange {
                index,
                groups: self.groups,
            });
        }
        Ok(index - 1)
    }

    fn model(&mut self, out: &mut Statements) -> Result<(), ConstraintError> {
        if self.peek().is_none() {
            return self.error("empty model string");
        }
        loop {
            self.chain(out)?;
            match self.peek() {
                Some(Tok::Comma) => self.at += 1,
                None => return Ok(()),
                Some(_) => return self.error("expected ',' or end of input"),
            }
        }
    }

    /// chain := segment (('<' | '>') segment)*
    /// segment := term ('=' term)*
    fn chain(&mut self, out: &mut Statements) -> Result<(), ConstraintError> {
        let mut prev = self.segment(out)?;
        loop {
            let less = match self.peek() {
                Some(Tok::Less) => true,
                Some(Tok::Greater) => false,
                _ => return Ok(()),
            };
            self.at += 1;
            let next = self.segment(out)?;
            let (lo, hi) = if less { (&prev, &next) } else { (&next, &prev) };
            for &a in lo {
                for &b in hi {
                    out.relations.push((a, b));
                }
            }
            prev = next;
        }
    }

    fn segment(&mut self, out: &mut Statements) -> Result<Vec<usize>, ConstraintError> {
        let first = self.term(out)?;
        let mut members = first.groups;
        let mut merged = false;
        out.equalities.extend(first.equalities);
        while self.peek() == Some(Tok::Equal) {
            self.at += 1;
            let t = self.term(out)?;
            out.equalities.extend(t.equalities);
            members.extend(t.groups);
            merged = true;
        }
        if merged {
            let mut set = members.clone();
            set.sort_unstable();
            set.dedup();
            out.equalities.push(set);
        }
        Ok(members)
    }

    /// term := group | '{' segment (',' segment)* '}'
    fn term(&mut self, out: &mut Statements) -> Result<Term, ConstraintError> {
        match self.peek() {
            Some(Tok::Group(i)) => {
                self.at += 1;
                let g = self.group(i)?;
                Ok(Term {
                    groups: vec![g],
                    equalities: Vec::new(),
                })
            }
            Some(Tok::LBrace) => {
                self.at += 1;
                let mut term = Term::default();
                loop {
                    let before = out.equalities.len();
                    let seg = self.segment(out)?;
                    term.equalities.extend(out.equalities.drain(before..));
                    term.groups.extend(seg);
                    match self.peek() {
                        Some(Tok::Comma) => self.at += 1,
                        Some(Tok::RBrace) => {
                            self.at += 1;
                            return Ok(term);
                        }
                        _ => return self.error("expected ',' or '}' inside braces"),
                    }
                }
            }
            _ => self.error("expected a group like 'mu1' or '{'"),
        }
    }
}

pub fn parse_model_spec(
    name: &str,
    text: &str,
    groups: usize,
) -> Result<ConstraintModel, ConstraintError> {
    if groups == 0 {
        return Err(ConstraintError::NoGroups);
    }
    let toks = tokenize(text)?;
    let mut parser = Parser {
        toks: &toks,
        at: 0,
        end: text.len(),
        groups,
    };
    let mut st = Statements::default();
    parser.model(&mut st)?;

    // Each group may belong to at most one declared equality set.
    let mut declared: BTreeMap<usize, &Vec<usize>> = BTreeMap::new();
    for set in &st.equalities {
        for &g in set {
            if let Some(prev) = declared.insert(g, set) {
                if prev != set {
                    return Err(ConstraintError::ConflictingEquality(g + 1));
                }
            }
        }
    }

    // Label each group by the lowest member of its equality set, then number
    // classes in increasing order of that label.
    let mut rep: Vec<usize> = (0..groups).collect();
    for set in &st.equalities {
        for &g in set {
            rep[g] = set[0];
        }
    }
    let reps: BTreeSet<usize> = rep.iter().copied().collect();
    let class_index: BTreeMap<usize, usize> =
        reps.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let class_of_group: Vec<usize> = rep.iter().map(|r| class_index[r]).collect();
    let mut classes = vec![Vec::new(); reps.len()];
    for (g, &c) in class_of_group.iter().enumerate() {
        classes[c].push(g);
    }

    let k = classes.len();
    let mut reach = vec![vec![false; k]; k];
    for &(a, b) in &st.relations {
        let (ca, cb) = (class_of_group[a], class_of_group[b]);
        if ca == cb {
            return Err(ConstraintError::Cycle(a + 1));
        }
        reach[ca][cb] = true;
    }
    // Warshall closure.
    for m in 0..k {
        for i in 0..k {
            if reach[i][m] {
                for j in 0..k {
                    if reach[m][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    if let Some(c) = (0..k).find(|&c| reach[c][c]) {
        return Err(ConstraintError::Cycle(classes[c][0] + 1));
    }
    let order = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .filter(|&(i, j)| reach[i][j])
        .collect();

    Ok(ConstraintModel {
        name: name.to_string(),
        groups,
        classes,
        class_of_group,
        order,
    })
}
