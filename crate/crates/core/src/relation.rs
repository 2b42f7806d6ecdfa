//! Substitutions and relations over canonical factor references.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::word::{FactorIndex, FactorRef, Word};

/// Variable bindings to canonical factor references of one host word.
pub type Bindings = BTreeMap<String, FactorRef>;

/// A set of tuples, used for the content of relation symbols.
pub type TupleSet = BTreeSet<Vec<FactorRef>>;

/// A pattern substitution: a host word (the value of `u`) and word values for
/// some variables. Values are plain words; whether they are factors of the host
/// is checked when the substitution is used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substitution {
    pub host: Word,
    pub bindings: BTreeMap<String, Word>,
}

impl Substitution {
    pub fn new(host: Word) -> Self {
        Self {
            host,
            bindings: BTreeMap::new(),
        }
    }

    pub fn bind(mut self, var: &str, value: &str) -> Self {
        self.bindings.insert(var.to_string(), Word::new(value));
        self
    }

    /// Resolves every binding to a canonical factor reference. Bindings whose
    /// value is not a factor of the host are returned separately.
    pub fn resolve(&self, idx: &FactorIndex) -> (Bindings, Vec<String>) {
        let mut ok = Bindings::new();
        let mut bad = Vec::new();
        for (v, val) in &self.bindings {
            match idx.find(val.symbols()) {
                Some(f) => {
                    ok.insert(v.clone(), f);
                }
                None => bad.push(v.clone()),
            }
        }
        (ok, bad)
    }
}

/// A set of rows over an ordered scheme of variable names.
///
/// The scheme is kept sorted and rows hold canonical references, so two
/// relations over the same word are equal exactly when they denote the same
/// set of value tuples. Rows are kept sorted and free of duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Relation {
    scheme: Vec<String>,
    rows: Vec<Vec<FactorRef>>,
}

impl Relation {
    /// An empty relation over `scheme` (which need not be sorted).
    pub fn empty<S: AsRef<str>>(scheme: &[S]) -> Self {
        let mut s: Vec<String> = scheme.iter().map(|v| v.as_ref().to_string()).collect();
        s.sort();
        s.dedup();
        Self {
            scheme: s,
            rows: Vec::new(),
        }
    }

    /// The zero-column relation that is either `{()}` or `{}`.
    pub fn unit(holds: bool) -> Self {
        Self {
            scheme: Vec::new(),
            rows: if holds { vec![Vec::new()] } else { Vec::new() },
        }
    }

    /// Builds a relation from rows given in the column order of `scheme`.
    pub fn from_rows<S: AsRef<str>>(scheme: &[S], rows: Vec<Vec<FactorRef>>) -> Self {
        let names: Vec<String> = scheme.iter().map(|v| v.as_ref().to_string()).collect();
        let mut order: Vec<usize> = (0..names.len()).collect();
        order.sort_by(|&a, &b| names[a].cmp(&names[b]));
        let sorted_names: Vec<String> = order.iter().map(|&i| names[i].clone()).collect();
        debug_assert!(
            sorted_names.windows(2).all(|w| w[0] != w[1]),
            "duplicate column"
        );
        let identity = order.iter().enumerate().all(|(i, &j)| i == j);
        let mut rows: Vec<Vec<FactorRef>> = if identity {
            rows
        } else {
            rows.into_iter()
                .map(|r| order.iter().map(|&i| r[i]).collect())
                .collect()
        };
        rows.sort_unstable();
        rows.dedup();
        Self {
            scheme: sorted_names,
            rows,
        }
    }

    /// Rows already in sorted-scheme column order, possibly unsorted.
    fn from_sorted_scheme(scheme: Vec<String>, mut rows: Vec<Vec<FactorRef>>) -> Self {
        rows.sort_unstable();
        rows.dedup();
        Self { scheme, rows }
    }

    pub fn scheme(&self) -> &[String] {
        &self.scheme
    }

    pub fn rows(&self) -> &[Vec<FactorRef>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.scheme.len()
    }

    pub fn column(&self, var: &str) -> Option<usize> {
        self.scheme.binary_search_by(|s| s.as_str().cmp(var)).ok()
    }

    pub fn contains(&self, row: &[FactorRef]) -> bool {
        self.rows.binary_search_by(|r| r.as_slice().cmp(row)).is_ok()
    }

    /// The rows as maps from variable to binding.
    pub fn bindings(&self) -> impl Iterator<Item = Bindings> + '_ {
        self.rows.iter().map(move |r| {
            self.scheme
                .iter()
                .cloned()
                .zip(r.iter().copied())
                .collect()
        })
    }

    /// Rows rendered as words.
    pub fn value_rows(&self, idx: &FactorIndex) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&f| idx.text(f)).collect())
            .collect()
    }

    /// Natural join.
    pub fn join(&self, other: &Relation) -> Relation {
        let common: Vec<&String> = self
            .scheme
            .iter()
            .filter(|v| other.column(v).is_some())
            .collect();
        let mut scheme: Vec<String> = self.scheme.clone();
        scheme.extend(other.scheme.iter().filter(|v| self.column(v).is_none()).cloned());
        scheme.sort();
        // for every output column: (take from left?, index)
        let sources: Vec<(bool, usize)> = scheme
            .iter()
            .map(|v| match self.column(v) {
                Some(i) => (true, i),
                None => (false, other.column(v).unwrap()),
            })
            .collect();
        let lkey: Vec<usize> = common.iter().map(|v| self.column(v).unwrap()).collect();
        let rkey: Vec<usize> = common.iter().map(|v| other.column(v).unwrap()).collect();
        let mut index: HashMap<Vec<FactorRef>, Vec<usize>> = HashMap::new();
        for (j, r) in other.rows.iter().enumerate() {
            index
                .entry(rkey.iter().map(|&k| r[k]).collect())
                .or_default()
                .push(j);
        }
        let mut rows = Vec::new();
        for l in &self.rows {
            let key: Vec<FactorRef> = lkey.iter().map(|&k| l[k]).collect();
            if let Some(matches) = index.get(&key) {
                for &j in matches {
                    let r = &other.rows[j];
                    rows.push(
                        sources
                            .iter()
                            .map(|&(left, i)| if left { l[i] } else { r[i] })
                            .collect(),
                    );
                }
            }
        }
        Relation::from_sorted_scheme(scheme, rows)
    }

    /// Rows of `self` that agree with some row of `other` on the shared columns
    /// (`keep = true`), or with none of them (`keep = false`).
    pub fn semijoin(&self, other: &Relation, keep: bool) -> Relation {
        let common: Vec<&String> = other
            .scheme
            .iter()
            .filter(|v| self.column(v).is_some())
            .collect();
        let lkey: Vec<usize> = common.iter().map(|v| self.column(v).unwrap()).collect();
        let rkey: Vec<usize> = common.iter().map(|v| other.column(v).unwrap()).collect();
        let keys: HashSet<Vec<FactorRef>> = other
            .rows
            .iter()
            .map(|r| rkey.iter().map(|&k| r[k]).collect())
            .collect();
        let rows = self
            .rows
            .iter()
            .filter(|l| keys.contains(&lkey.iter().map(|&k| l[k]).collect::<Vec<_>>()) == keep)
            .cloned()
            .collect();
        Relation {
            scheme: self.scheme.clone(),
            rows,
        }
    }

    /// Projects onto the given columns (which must exist).
    pub fn project<S: AsRef<str>>(&self, vars: &[S]) -> Relation {
        let mut keep: Vec<String> = vars.iter().map(|v| v.as_ref().to_string()).collect();
        keep.sort();
        keep.dedup();
        let cols: Vec<usize> = keep
            .iter()
            .map(|v| self.column(v).expect("projection onto an existing column"))
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|r| cols.iter().map(|&c| r[c]).collect())
            .collect();
        Relation::from_sorted_scheme(keep, rows)
    }

    /// Drops one column, if present.
    pub fn project_away(&self, var: &str) -> Relation {
        match self.column(var) {
            None => self.clone(),
            Some(_) => {
                let keep: Vec<&String> = self.scheme.iter().filter(|v| *v != var).collect();
                self.project(&keep)
            }
        }
    }

    /// Extends the scheme to `scheme` (a superset), pairing every row with every
    /// value of `domain` in each new column.
    pub fn pad<S: AsRef<str>>(&self, scheme: &[S], domain: &[FactorRef]) -> Relation {
        let mut full: Vec<String> = scheme.iter().map(|v| v.as_ref().to_string()).collect();
        full.sort();
        full.dedup();
        let mut cur = self.clone();
        for v in &full {
            if cur.column(v).is_none() {
                let col = Relation::from_sorted_scheme(
                    vec![v.clone()],
                    domain.iter().map(|&f| vec![f]).collect(),
                );
                cur = cur.join(&col);
            }
        }
        cur
    }

    /// Union of two relations over the same scheme.
    pub fn union(&self, other: &Relation) -> Relation {
        assert_eq!(self.scheme, other.scheme, "union over different schemes");
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Relation::from_sorted_scheme(self.scheme.clone(), rows)
    }

    /// All rows over the scheme with values from `domain`.
    pub fn full<S: AsRef<str>>(scheme: &[S], domain: &[FactorRef]) -> Relation {
        Relation::unit(true).pad(scheme, domain)
    }

    /// The complement with respect to `domain` in every column.
    pub fn complement(&self, domain: &[FactorRef]) -> Relation {
        let full = Relation::full(&self.scheme, domain);
        full.semijoin(self, false)
    }

    /// Relational division by the whole domain in column `var`: the rows over
    /// the remaining columns that occur with every one of `domain_size` values.
    pub fn divide(&self, var: &str, domain_size: usize) -> Relation {
        let Some(c) = self.column(var) else {
            return self.clone();
        };
        let mut counts: BTreeMap<Vec<FactorRef>, usize> = BTreeMap::new();
        for r in &self.rows {
            let mut key = r.clone();
            key.remove(c);
            *counts.entry(key).or_default() += 1;
        }
        let mut scheme = self.scheme.clone();
        scheme.remove(c);
        let rows = counts
            .into_iter()
            .filter(|&(_, n)| n == domain_size)
            .map(|(k, _)| k)
            .collect();
        Relation { scheme, rows }
    }

    /// Keeps the rows whose column `var` holds `value`, and drops that column.
    pub fn select(&self, var: &str, value: FactorRef) -> Relation {
        let Some(c) = self.column(var) else {
            return self.clone();
        };
        let mut scheme = self.scheme.clone();
        scheme.remove(c);
        let rows = self
            .rows
            .iter()
            .filter(|r| r[c] == value)
            .map(|r| {
                let mut r = r.clone();
                r.remove(c);
                r
            })
            .collect();
        Relation { scheme, rows }
    }

    /// Renames columns; the new names must be distinct.
    pub fn rename(&self, map: &BTreeMap<String, String>) -> Relation {
        let names: Vec<String> = self
            .scheme
            .iter()
            .map(|v| map.get(v).cloned().unwrap_or_else(|| v.clone()))
            .collect();
        Relation::from_rows(&names, self.rows.clone())
    }

    /// A readable rendering as a table of words.
    pub fn display<'a>(&'a self, idx: &'a FactorIndex) -> RelationDisplay<'a> {
        RelationDisplay { rel: self, idx }
    }
}

pub struct RelationDisplay<'a> {
    rel: &'a Relation,
    idx: &'a FactorIndex,
}

impl fmt::Display for RelationDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "({})", self.rel.scheme.join(", "))?;
        for r in self.rel.value_rows(self.idx) {
            let cells: Vec<String> = r.iter().map(|s| format!("{s:?}")).collect();
            writeln!(f, "({})", cells.join(", "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: usize, l: usize) -> FactorRef {
        FactorRef::new(s, l)
    }

    #[test]
    fn from_rows_sorts_scheme_and_dedups() {
        let r = Relation::from_rows(&["y", "x"], vec![vec![f(1, 1), f(2, 1)], vec![f(1, 1), f(2, 1)]]);
        assert_eq!(r.scheme(), &["x".to_string(), "y".to_string()]);
        assert_eq!(r.rows(), &[vec![f(2, 1), f(1, 1)]]);
    }

    #[test]
    fn join_and_semijoin() {
        let a = Relation::from_rows(&["x", "y"], vec![vec![f(1, 0), f(1, 1)], vec![f(1, 1), f(2, 1)]]);
        let b = Relation::from_rows(&["y", "z"], vec![vec![f(1, 1), f(1, 2)]]);
        let j = a.join(&b);
        assert_eq!(j.scheme(), &["x", "y", "z"]);
        assert_eq!(j.rows(), &[vec![f(1, 0), f(1, 1), f(1, 2)]]);
        assert_eq!(a.semijoin(&b, true).len(), 1);
        assert_eq!(a.semijoin(&b, false).rows(), &[vec![f(1, 1), f(2, 1)]]);
    }

    #[test]
    fn complement_and_division() {
        let dom = [f(1, 0), f(1, 1)];
        let r = Relation::from_rows(&["x", "y"], vec![vec![f(1, 0), f(1, 0)], vec![f(1, 0), f(1, 1)], vec![f(1, 1), f(1, 1)]]);
        assert_eq!(r.complement(&dom).rows(), &[vec![f(1, 1), f(1, 0)]]);
        let d = r.divide("y", 2);
        assert_eq!(d.rows(), &[vec![f(1, 0)]]);
        assert_eq!(Relation::unit(true).complement(&dom), Relation::unit(false));
    }

    #[test]
    fn pad_and_project() {
        let dom = [f(1, 0), f(1, 1)];
        let r = Relation::from_rows(&["x"], vec![vec![f(1, 1)]]);
        let p = r.pad(&["x", "y"], &dom);
        assert_eq!(p.len(), 2);
        assert_eq!(p.project(&["x"]), r);
        assert_eq!(p.select("y", f(1, 0)), r);
    }
}
