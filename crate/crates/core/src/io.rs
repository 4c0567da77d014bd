//! Space documents, tree point and label-map parsing, ultrametric fitting
//! and dendrogram export.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filling::{FillingTree, TreePoint};
use crate::metric::{ExtendedMetricSpace, PointId};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    #[default]
    Distances,
    Heights,
}

/// A matrix entry: a JSON number, or one of the tokens `"inf"` / `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Token(Token),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Token {
    #[serde(rename = "inf")]
    Inf,
    #[serde(rename = "-inf")]
    NegInf,
}

impl Entry {
    fn from_f64(x: f64) -> Entry {
        if x == f64::INFINITY {
            Entry::Token(Token::Inf)
        } else if x == f64::NEG_INFINITY {
            Entry::Token(Token::NegInf)
        } else {
            Entry::Number(x)
        }
    }

    fn to_f64(self) -> f64 {
        match self {
            Entry::Number(x) => x,
            Entry::Token(Token::Inf) => f64::INFINITY,
            Entry::Token(Token::NegInf) => f64::NEG_INFINITY,
        }
    }
}

/// On-disk form of an extended metric space. `matrix` is the row-major
/// upper triangle (`n(n-1)/2` entries); a full `n × n` matrix is also read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDocument {
    pub format_version: u32,
    pub points: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<String>,
    #[serde(default)]
    pub encoding: Encoding,
    pub matrix: Vec<Entry>,
}

impl SpaceDocument {
    pub fn from_space(space: &ExtendedMetricSpace, encoding: Encoding) -> SpaceDocument {
        let n = space.len();
        let source = match encoding {
            Encoding::Distances => space.distance_matrix(),
            Encoding::Heights => space.height_matrix(),
        };
        let mut matrix = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                matrix.push(Entry::from_f64(source[i * n + j]));
            }
        }
        SpaceDocument {
            format_version: FORMAT_VERSION,
            points: space.labels().to_vec(),
            omega: space.omega().map(|w| space.label(w).to_string()),
            encoding,
            matrix,
        }
    }

    /// Decodes and validates. Set `strict` to reject triangle-inequality failures.
    pub fn to_space(&self, strict: bool) -> Result<ExtendedMetricSpace> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let n = self.points.len();
        let omega = match &self.omega {
            None => None,
            Some(w) => Some(
                self.points
                    .iter()
                    .position(|p| p == w)
                    .ok_or_else(|| Error::UnknownPoint(w.clone()))?,
            ),
        };
        let diagonal = match self.encoding {
            Encoding::Distances => 0.0,
            Encoding::Heights => f64::INFINITY,
        };
        let mut full = vec![diagonal; n * n];
        if self.matrix.len() == n * n {
            for (slot, e) in full.iter_mut().zip(&self.matrix) {
                *slot = e.to_f64();
            }
        } else if self.matrix.len() == n * n.saturating_sub(1) / 2 {
            let mut entries = self.matrix.iter();
            for i in 0..n {
                for j in i + 1..n {
                    let v = entries.next().expect("length checked").to_f64();
                    full[i * n + j] = v;
                    full[j * n + i] = v;
                }
            }
        } else if n >= 3 {
            return Err(Error::Parse(format!(
                "matrix has {} entries; expected {} (upper triangle) or {} (full)",
                self.matrix.len(),
                n * (n - 1) / 2,
                n * n
            )));
        }
        let labels = self.points.clone();
        match (self.encoding, strict) {
            (Encoding::Distances, true) => ExtendedMetricSpace::new(labels, omega, full),
            (Encoding::Distances, false) => ExtendedMetricSpace::new_relaxed(labels, omega, full),
            (Encoding::Heights, true) => ExtendedMetricSpace::from_heights(labels, omega, full),
            (Encoding::Heights, false) => ExtendedMetricSpace::from_heights_relaxed(labels, omega, full),
        }
    }
}

/// Parses and fully validates a JSON space document.
pub fn parse_space(text: &str) -> Result<ExtendedMetricSpace> {
    let doc: SpaceDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.to_space(true)
}

pub fn write_space(space: &ExtendedMetricSpace, encoding: Encoding) -> String {
    let doc = SpaceDocument::from_space(space, encoding);
    serde_json::to_string_pretty(&doc).expect("documents always serialize")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreePointDocument {
    pub anchor: String,
    pub t: f64,
}

impl TreePointDocument {
    pub fn from_point(tree: &FillingTree, p: &TreePoint) -> TreePointDocument {
        TreePointDocument {
            anchor: tree.base().label(p.anchor()).to_string(),
            t: p.height(),
        }
    }

    pub fn to_point(&self, tree: &FillingTree) -> Result<TreePoint> {
        tree.point_by_label(&self.anchor, self.t)
    }
}

/// Reads a tree point written either as `label:t` or as a JSON
/// [`TreePointDocument`].
pub fn parse_tree_point(tree: &FillingTree, text: &str) -> Result<TreePoint> {
    let text = text.trim();
    if text.starts_with('{') {
        let doc: TreePointDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        return doc.to_point(tree);
    }
    let (label, t) = text
        .rsplit_once(':')
        .ok_or_else(|| Error::Parse(format!("expected label:t, got {text:?}")))?;
    let t: f64 = t
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad height in {text:?}")))?;
    tree.point_by_label(label.trim(), t)
}

/// Reads one tree point per line (blank lines and `#` comments skipped).
pub fn parse_tree_points(tree: &FillingTree, text: &str) -> Result<Vec<TreePoint>> {
    let text = text.trim();
    if text.starts_with('[') {
        let docs: Vec<TreePointDocument> =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        return docs.iter().map(|d| d.to_point(tree)).collect();
    }
    content_lines(text).map(|l| parse_tree_point(tree, l)).collect()
}

fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
}

/// Reads `source target` label pairs, one per line.
pub fn parse_label_map(text: &str) -> Result<Vec<(String, String)>> {
    content_lines(text)
        .map(|line| {
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(s), Some(t), None) => Ok((s.to_string(), t.to_string())),
                _ => Err(Error::Parse(format!("expected two labels per line, got {line:?}"))),
            }
        })
        .collect()
}

/// The subdominant ultrametric: `u(a, b)` is the least, over paths from `a`
/// to `b`, of the largest step. A remote point stays remote.
pub fn fit_ultrametric(space: &ExtendedMetricSpace) -> Result<ExtendedMetricSpace> {
    let n = space.len();
    let w = space.omega().map(|p| p.0);
    let mut u = space.distance_matrix().to_vec();
    for k in 0..n {
        if Some(k) == w {
            continue;
        }
        for i in 0..n {
            if Some(i) == w || i == k {
                continue;
            }
            let uik = u[i * n + k];
            for j in 0..n {
                if Some(j) == w || j == i || j == k {
                    continue;
                }
                let via = uik.max(u[k * n + j]);
                if via < u[i * n + j] {
                    u[i * n + j] = via;
                }
            }
        }
    }
    ExtendedMetricSpace::new(space.labels().to_vec(), space.omega_index(), u)
}

/// A set of leaves with the height at which all of them have merged.
struct Clade {
    members: Vec<usize>,
    height: f64,
}

fn split(tree: &FillingTree, members: &[usize], joins: impl Fn(f64) -> bool) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &z in members {
        match groups.iter_mut().find(|g| joins(tree.h(g[0], z))) {
            Some(g) => g.push(z),
            None => groups.push(vec![z]),
        }
    }
    let labels = tree.base().labels();
    groups.sort_by(|a, b| least_label(labels, a).cmp(least_label(labels, b)));
    groups
}

fn least_label<'a>(labels: &'a [String], members: &[usize]) -> &'a str {
    members
        .iter()
        .map(|&i| labels[i].as_str())
        .min()
        .expect("clades are nonempty")
}

fn clade(tree: &FillingTree, members: Vec<usize>) -> Clade {
    let mut height = f64::INFINITY;
    for (k, &i) in members.iter().enumerate() {
        for &j in &members[k + 1..] {
            height = height.min(tree.h(i, j));
        }
    }
    Clade { members, height }
}

fn quote_label(label: &str) -> String {
    if label.chars().any(|c| "()[]:;,' \t\n".contains(c)) {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

fn write_node(tree: &FillingTree, c: &Clade, leaf_height: f64, out: &mut String) {
    if c.members.len() == 1 {
        out.push_str(&quote_label(&tree.base().labels()[c.members[0]]));
        return;
    }
    out.push('(');
    for (k, group) in split(tree, &c.members, |h| h > c.height).into_iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        let child = clade(tree, group);
        let top = if child.members.len() == 1 { leaf_height } else { child.height };
        write_node(tree, &child, leaf_height, out);
        write!(out, ":{}", top - c.height).expect("writing to a string");
    }
    out.push(')');
}

/// Newick-style rendering of the filling above height `cut`. Leaves sit one
/// unit above the highest merge (or the cut); each branch length is a height
/// difference. A single clade is written `X:len;` with `len` its merge height
/// above the cut; several clades are written `(X1:l1,X2:l2,...);`.
pub fn export_dendrogram(tree: &FillingTree, cut: f64) -> Result<String> {
    let finite = tree.finite_indices().to_vec();
    if finite.len() < 2 {
        return Err(Error::domain("a dendrogram needs at least two finite points"));
    }
    if !cut.is_finite() {
        return Err(Error::domain("cut height must be finite"));
    }
    let (_, hi) = tree.height_range();
    let leaf_height = hi.max(cut) + 1.0;
    let clades: Vec<Clade> = split(tree, &finite, |h| h >= cut)
        .into_iter()
        .map(|g| clade(tree, g))
        .collect();
    let top = |c: &Clade| if c.members.len() == 1 { leaf_height } else { c.height };
    let mut out = String::new();
    if let [only] = clades.as_slice() {
        write_node(tree, only, leaf_height, &mut out);
        write!(out, ":{}", top(only) - cut).expect("writing to a string");
    } else {
        out.push('(');
        for (k, c) in clades.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write_node(tree, c, leaf_height, &mut out);
            write!(out, ":{}", top(c) - cut).expect("writing to a string");
        }
        out.push(')');
    }
    out.push(';');
    Ok(out)
}

/// Leaf labels and pairwise merge heights read back from a dendrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    /// Row-major `n × n`; `+∞` on the diagonal, `-∞` between separate clades.
    pub heights: Vec<f64>,
}

impl Dendrogram {
    pub fn height(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.heights[i * self.labels.len() + j])
    }
}

enum Node {
    Leaf(String, Option<f64>),
    Inner(Vec<Node>, Option<f64>),
}

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    text: &'a str,
}

impl Parser<'_> {
    fn err(&mut self, what: &str) -> Error {
        let at = self.chars.peek().map_or(self.text.len(), |&(i, _)| i);
        Error::Parse(format!("dendrogram: {what} at byte {at}"))
    }

    fn skip_ws(&mut self) {
        while self.chars.next_if(|(_, c)| c.is_whitespace()).is_some() {}
    }

    fn node(&mut self) -> Result<Node> {
        self.skip_ws();
        if self.chars.next_if(|&(_, c)| c == '(').is_some() {
            let mut children = vec![self.node()?];
            loop {
                self.skip_ws();
                match self.chars.next() {
                    Some((_, ',')) => children.push(self.node()?),
                    Some((_, ')')) => break,
                    _ => return Err(self.err("expected ',' or ')'")),
                }
            }
            let len = self.length()?;
            Ok(Node::Inner(children, len))
        } else {
            let label = self.label()?;
            let len = self.length()?;
            Ok(Node::Leaf(label, len))
        }
    }

    fn label(&mut self) -> Result<String> {
        self.skip_ws();
        let mut label = String::new();
        if self.chars.next_if(|&(_, c)| c == '\'').is_some() {
            loop {
                match self.chars.next() {
                    Some((_, '\'')) => {
                        if self.chars.next_if(|&(_, c)| c == '\'').is_some() {
                            label.push('\'');
                        } else {
                            break;
                        }
                    }
                    Some((_, c)) => label.push(c),
                    None => return Err(self.err("unterminated quoted label")),
                }
            }
        } else {
            while let Some((_, c)) = self.chars.next_if(|&(_, c)| !"()[]:;,' \t\n\r".contains(c)) {
                label.push(c);
            }
        }
        if label.is_empty() {
            return Err(self.err("expected a label"));
        }
        Ok(label)
    }

    fn length(&mut self) -> Result<Option<f64>> {
        self.skip_ws();
        if self.chars.next_if(|&(_, c)| c == ':').is_none() {
            return Ok(None);
        }
        self.skip_ws();
        let mut num = String::new();
        while let Some((_, c)) = self.chars.next_if(|&(_, c)| c.is_ascii_digit() || "+-.eE".contains(c) || c.is_alphabetic()) {
            num.push(c);
        }
        num.parse()
            .map(Some)
            .map_err(|_| self.err(&format!("bad branch length {num:?}")))
    }
}

fn collect(node: &Node, height: f64, leaves: &mut Vec<(String, Vec<(usize, f64)>)>, path: &mut Vec<(usize, f64)>, next_id: &mut usize) {
    match node {
        Node::Leaf(label, _) => leaves.push((label.clone(), path.clone())),
        Node::Inner(children, _) => {
            let id = *next_id;
            *next_id += 1;
            path.push((id, height));
            for child in children {
                let len = match child {
                    Node::Leaf(_, l) | Node::Inner(_, l) => l.unwrap_or(0.0),
                };
                collect(child, height + len, leaves, path, next_id);
            }
            path.pop();
        }
    }
}

/// Inverse of [`export_dendrogram`] for the same `cut`.
pub fn parse_dendrogram(text: &str, cut: f64) -> Result<Dendrogram> {
    let mut p = Parser {
        chars: text.char_indices().peekable(),
        text,
    };
    let root = p.node()?;
    p.skip_ws();
    if p.chars.next().map(|(_, c)| c) != Some(';') {
        return Err(p.err("expected ';'"));
    }
    p.skip_ws();
    if p.chars.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    let mut leaves = Vec::new();
    let mut next_id = 0;
    match &root {
        Node::Inner(_, None) => {
            // a forest: the outer group is a virtual root at the cut
            let Node::Inner(children, _) = &root else { unreachable!() };
            for child in children {
                let len = match child {
                    Node::Leaf(_, l) | Node::Inner(_, l) => l.unwrap_or(0.0),
                };
                collect(child, cut + len, &mut leaves, &mut Vec::new(), &mut next_id);
            }
        }
        Node::Inner(_, Some(len)) => collect(&root, cut + len, &mut leaves, &mut Vec::new(), &mut next_id),
        Node::Leaf(..) => return Err(Error::Parse("dendrogram has a single leaf".into())),
    }
    let n = leaves.len();
    let mut seen = BTreeMap::new();
    for (i, (label, _)) in leaves.iter().enumerate() {
        if seen.insert(label.clone(), i).is_some() {
            return Err(Error::Parse(format!("duplicate leaf {label:?}")));
        }
    }
    let mut heights = vec![f64::NEG_INFINITY; n * n];
    for i in 0..n {
        heights[i * n + i] = f64::INFINITY;
        for j in i + 1..n {
            // deepest shared ancestor
            let h = leaves[i]
                .1
                .iter()
                .zip(&leaves[j].1)
                .take_while(|(a, b)| a.0 == b.0)
                .last()
                .map_or(f64::NEG_INFINITY, |(a, _)| a.1);
            heights[i * n + j] = h;
            heights[j * n + i] = h;
        }
    }
    Ok(Dendrogram {
        labels: leaves.into_iter().map(|(l, _)| l).collect(),
        heights,
    })
}

/// Heights of the finite points of `tree` in the layout of a [`Dendrogram`].
pub fn dendrogram_heights(tree: &FillingTree) -> Dendrogram {
    let finite = tree.finite_indices();
    let n = finite.len();
    let mut heights = vec![f64::INFINITY; n * n];
    for (a, &i) in finite.iter().enumerate() {
        for (b, &j) in finite.iter().enumerate() {
            if a != b {
                heights[a * n + b] = tree.h(i, j);
            }
        }
    }
    Dendrogram {
        labels: finite.iter().map(|&i| tree.base().label(PointId(i)).to_string()).collect(),
        heights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Axiom;

    const E_DOC: &str = r#"{
        "format_version": 1,
        "points": ["a", "b", "c", "w"],
        "omega": "w",
        "encoding": "heights",
        "matrix": [1, 0, "-inf", 0, "-inf", "-inf"]
    }"#;

    fn example_e() -> FillingTree {
        FillingTree::new(parse_space(E_DOC).unwrap()).unwrap()
    }

    #[test]
    fn parse_example_document() {
        let s = parse_space(E_DOC).unwrap();
        let (a, b, c) = (PointId(0), PointId(1), PointId(2));
        assert_eq!(s.height(a, b).unwrap().to_f64(), 1.0);
        assert_eq!(s.height(a, c).unwrap().to_f64(), 0.0);
        assert_eq!(s.height(b, c).unwrap().to_f64(), 0.0);
        assert_eq!(s.omega(), Some(PointId(3)));
    }

    #[test]
    fn document_errors_name_the_axiom() {
        let asym = r#"{"format_version":1,"points":["a","b","c"],"matrix":[0,1,2, 1,0,1, 1,1,0]}"#;
        assert_eq!(parse_space(asym).unwrap_err().violated_axiom(), Some(Axiom::Symmetry));
        let small = r#"{"format_version":1,"points":["a","b"],"matrix":[1]}"#;
        assert_eq!(parse_space(small).unwrap_err().violated_axiom(), Some(Axiom::Cardinality));
        let tri = r#"{"format_version":1,"points":["a","b","c"],"matrix":[1, 5, 1]}"#;
        assert_eq!(parse_space(tri).unwrap_err().violated_axiom(), Some(Axiom::Triangle));
        let remote = r#"{"format_version":1,"points":["a","b","c"],"omega":"c","matrix":[1, 5, "inf"]}"#;
        assert_eq!(parse_space(remote).unwrap_err().violated_axiom(), Some(Axiom::RemotePoint));
        assert!(matches!(parse_space("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn write_then_parse_is_lossless() {
        let s = example_e().base().clone();
        for enc in [Encoding::Distances, Encoding::Heights] {
            let back = parse_space(&write_space(&s, enc)).unwrap();
            assert_eq!(back.labels(), s.labels());
            assert_eq!(back.omega(), s.omega());
            if enc == Encoding::Distances {
                assert_eq!(back.distance_matrix(), s.distance_matrix());
            } else {
                assert_eq!(back.height_matrix(), s.height_matrix());
            }
        }
    }

    #[test]
    fn tree_points_and_maps() {
        let x = example_e();
        let p = parse_tree_point(&x, "b:1.5").unwrap();
        assert_eq!((p.anchor(), p.height()), (PointId(1), 1.5));
        let q = parse_tree_point(&x, r#"{"anchor": "c", "t": -1}"#).unwrap();
        assert_eq!(q.anchor(), PointId(0));
        assert!(parse_tree_point(&x, "w:0").is_err());
        assert!(parse_tree_point(&x, "a").is_err());
        let pts = parse_tree_points(&x, "# points\na:0\n\nb:2 # right branch\n").unwrap();
        assert_eq!(pts.len(), 2);

        let m = parse_label_map("a b\nb a # swap\n\nc c\nw w\n").unwrap();
        assert_eq!(m[1], ("b".to_string(), "a".to_string()));
        assert!(parse_label_map("a b c").is_err());
    }

    #[test]
    fn fit_ultrametric_examples() {
        let labels: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let path = ExtendedMetricSpace::from_fn(labels, None, |i, j| if (i, j) == (0, 2) { 2.0 } else { 1.0 }).unwrap();
        let fit = fit_ultrametric(&path).unwrap();
        assert_eq!(fit.dist(PointId(0), PointId(2)).to_f64(), 1.0);
        assert!(fit.is_ultrametric(Default::default()));
        let e = example_e().base().clone();
        assert_eq!(fit_ultrametric(&e).unwrap().distance_matrix(), e.distance_matrix());
    }

    #[test]
    fn dendrogram_of_example() {
        let x = example_e();
        assert_eq!(export_dendrogram(&x, -1.0).unwrap(), "((a:1,b:1):1,c:2):1;");
        assert_eq!(export_dendrogram(&x, 0.5).unwrap(), "((a:1,b:1):0.5,c:1.5);");
        for cut in [-1.0, 0.0, 0.5, 1.0, 3.0] {
            let d = parse_dendrogram(&export_dendrogram(&x, cut).unwrap(), cut).unwrap();
            let expect = |a: &str, b: &str| {
                let h = x.base().height(x.base().point(a).unwrap(), x.base().point(b).unwrap()).unwrap().to_f64();
                if h >= cut { h } else { f64::NEG_INFINITY }
            };
            for (a, b) in [("a", "b"), ("a", "c"), ("b", "c")] {
                assert_eq!(d.height(a, b).unwrap(), expect(a, b), "cut {cut} pair {a}{b}");
            }
        }
    }

    #[test]
    fn dendrogram_quotes_labels() {
        let labels: Vec<String> = ["x y", "it's", "z", "w"].map(String::from).to_vec();
        let s = ExtendedMetricSpace::from_fn(labels, Some(3), |_, _| 1.0).unwrap();
        let x = FillingTree::new(s).unwrap();
        let text = export_dendrogram(&x, -1.0).unwrap();
        assert_eq!(text, "('it''s':1,'x y':1,z:1):1;");
        let d = parse_dendrogram(&text, -1.0).unwrap();
        assert_eq!(d.height("x y", "it's"), Some(0.0));
    }
}
