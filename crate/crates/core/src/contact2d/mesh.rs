//! Triangular meshes with tagged boundary edges.
//!
//! Text format (`#` starts a comment, blank lines are ignored):
//!
//! ```text
//! nodes <n> triangles <m> edges <k>
//! <x> <y>            n lines
//! <a> <b> <c>        m lines, 0-based node indices
//! <a> <b> <tag>      k lines, tag 1 clamped, 2 traction, 3 contact
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Clamped,
    Traction,
    Contact,
}

impl BoundaryTag {
    pub fn code(self) -> u8 {
        match self {
            BoundaryTag::Clamped => 1,
            BoundaryTag::Traction => 2,
            BoundaryTag::Contact => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(BoundaryTag::Clamped),
            2 => Some(BoundaryTag::Traction),
            3 => Some(BoundaryTag::Contact),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
    /// Unit outward normal.
    pub normal: [f64; 2],
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<BoundaryEdge>,
    areas: Vec<f64>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl Mesh {
    /// Validates connectivity and boundary tags and computes edge normals.
    pub fn new(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, tagged: Vec<(usize, usize, BoundaryTag)>) -> Result<Self> {
        if nodes.is_empty() || triangles.is_empty() {
            return Err(Error::Mesh("mesh needs nodes and triangles".into()));
        }
        if nodes.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Mesh("non-finite node coordinate".into()));
        }
        let n = nodes.len();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let diag2 = (hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2);

        let mut areas = Vec::with_capacity(triangles.len());
        // boundary candidates: edge → (count, opposite vertex)
        let mut edge_use: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for (e, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= n) {
                return Err(Error::Mesh(format!("triangle {e} references a missing node")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Mesh(format!("triangle {e} repeats a node")));
            }
            let [a, b, c] = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
            let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
            if area <= 1e-14 * diag2 {
                return Err(Error::Mesh(format!("triangle {e} is degenerate (area {area:e})")));
            }
            areas.push(area);
            for k in 0..3 {
                let (i, j, opp) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
                let entry = edge_use.entry(edge_key(i, j)).or_insert((0, opp));
                entry.0 += 1;
            }
        }
        if let Some((k, _)) = edge_use.iter().find(|(_, v)| v.0 > 2) {
            return Err(Error::Mesh(format!("edge {k:?} shared by more than two triangles")));
        }

        let mut seen = HashMap::new();
        let mut edges = Vec::with_capacity(tagged.len());
        for (a, b, tag) in tagged {
            if a >= n || b >= n {
                return Err(Error::Mesh(format!("boundary edge ({a}, {b}) references a missing node")));
            }
            let key = edge_key(a, b);
            let Some(&(count, opp)) = edge_use.get(&key) else {
                return Err(Error::Mesh(format!("tagged edge ({a}, {b}) is not a triangle edge")));
            };
            if count != 1 {
                return Err(Error::Mesh(format!("tagged edge ({a}, {b}) is interior")));
            }
            if seen.insert(key, ()).is_some() {
                return Err(Error::Mesh(format!("boundary edge ({a}, {b}) tagged twice")));
            }
            let (pa, pb, pc) = (nodes[a], nodes[b], nodes[opp]);
            let d = [pb[0] - pa[0], pb[1] - pa[1]];
            let length = d[0].hypot(d[1]);
            let mut normal = [d[1] / length, -d[0] / length];
            if (pc[0] - pa[0]) * normal[0] + (pc[1] - pa[1]) * normal[1] > 0.0 {
                normal = [-normal[0], -normal[1]];
            }
            edges.push(BoundaryEdge { a, b, tag, normal, length });
        }
        let boundary_count = edge_use.values().filter(|v| v.0 == 1).count();
        if boundary_count != edges.len() {
            return Err(Error::Mesh(format!(
                "{} boundary edges but {} tagged; every boundary edge must be tagged exactly once",
                boundary_count,
                edges.len()
            )));
        }
        if !edges.iter().any(|e| e.tag == BoundaryTag::Clamped) {
            return Err(Error::Mesh("the clamped boundary part is empty".into()));
        }
        Ok(Self { nodes, triangles, edges, areas })
    }

    /// Rectangle `[0, lx] × [0, ly]` split into `nx × ny` cells of two
    /// triangles each; left edge clamped, bottom edge in contact, the rest
    /// traction.
    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || !(lx > 0.0) || !(ly > 0.0) {
            return Err(Error::Mesh("rectangle needs positive sizes and cell counts".into()));
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let mut tagged = Vec::new();
        for i in 0..nx {
            tagged.push((id(i, 0), id(i + 1, 0), BoundaryTag::Contact));
            tagged.push((id(i, ny), id(i + 1, ny), BoundaryTag::Traction));
        }
        for j in 0..ny {
            tagged.push((id(0, j), id(0, j + 1), BoundaryTag::Clamped));
            tagged.push((id(nx, j), id(nx, j + 1), BoundaryTag::Traction));
        }
        Self::new(nodes, triangles, tagged)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line_no, header) = lines.next().ok_or_else(|| Error::Mesh("empty mesh file".into()))?;
        let words: Vec<&str> = header.split_whitespace().collect();
        let count = |k: usize, name: &str| -> Result<usize> {
            if words.get(k) != Some(&name) {
                return Err(Error::Mesh(format!("line {line_no}: expected `nodes <n> triangles <m> edges <k>`")));
            }
            words
                .get(k + 1)
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| Error::Mesh(format!("line {line_no}: bad {name} count")))
        };
        if words.len() != 6 {
            return Err(Error::Mesh(format!("line {line_no}: expected `nodes <n> triangles <m> edges <k>`")));
        }
        let (nn, nt, ne) = (count(0, "nodes")?, count(2, "triangles")?, count(4, "edges")?);

        fn fields<T: std::str::FromStr>(line_no: usize, line: &str, want: usize) -> Result<Vec<T>> {
            let parsed: Option<Vec<T>> = line.split_whitespace().map(|w| w.parse().ok()).collect();
            match parsed {
                Some(v) if v.len() == want => Ok(v),
                _ => Err(Error::Mesh(format!("line {line_no}: expected {want} numeric fields"))),
            }
        }
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Mesh(format!("unexpected end of file while reading {what}")));

        let mut nodes = Vec::with_capacity(nn);
        for _ in 0..nn {
            let (no, l) = next("nodes")?;
            let v: Vec<f64> = fields(no, l, 2)?;
            nodes.push([v[0], v[1]]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (no, l) = next("triangles")?;
            let v: Vec<usize> = fields(no, l, 3)?;
            triangles.push([v[0], v[1], v[2]]);
        }
        let mut tagged = Vec::with_capacity(ne);
        for _ in 0..ne {
            let (no, l) = next("edges")?;
            let v: Vec<usize> = fields(no, l, 3)?;
            let tag = u8::try_from(v[2])
                .ok()
                .and_then(BoundaryTag::from_code)
                .ok_or_else(|| Error::Mesh(format!("line {no}: boundary tag must be 1, 2 or 3")))?;
            tagged.push((v[0], v[1], tag));
        }
        if let Some((no, _)) = lines.next() {
            return Err(Error::Mesh(format!("line {no}: trailing content after the declared counts")));
        }
        Self::new(nodes, triangles, tagged)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes {} triangles {} edges {}", self.nodes.len(), self.triangles.len(), self.edges.len());
        for p in &self.nodes {
            let _ = writeln!(s, "{:e} {:e}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.a, e.b, e.tag.code());
        }
        s
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[BoundaryEdge] {
        &self.edges
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn edges_tagged(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.edges.iter().filter(move |e| e.tag == tag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "\
# unit square, two triangles
nodes 4 triangles 2 edges 4
0 0
1 0
1 1
0 1
0 1 2
0 2 3
0 1 3   # bottom
1 2 2
2 3 2
3 0 1
";

    #[test]
    fn parses_square() {
        let m = Mesh::parse(SQUARE).unwrap();
        assert_eq!(m.nodes().len(), 4);
        let bottom = m.edges_tagged(BoundaryTag::Contact).next().unwrap();
        assert_eq!(bottom.normal, [0.0, -1.0]);
        assert_eq!(bottom.length, 1.0);
        let left = m.edges_tagged(BoundaryTag::Clamped).next().unwrap();
        assert_eq!(left.normal, [-1.0, 0.0]);
        assert_eq!(Mesh::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn rejects_untagged_or_duplicate_edges() {
        let missing = SQUARE.replace("edges 4", "edges 3").replace("3 0 1\n", "");
        assert!(Mesh::parse(&missing).is_err());
        let twice = SQUARE.replace("edges 4", "edges 5").replace("3 0 1\n", "3 0 1\n0 3 2\n");
        assert!(Mesh::parse(&twice).is_err());
        let interior = SQUARE.replace("3 0 1\n", "0 2 1\n");
        assert!(Mesh::parse(&interior).is_err());
    }

    #[test]
    fn rejects_missing_clamp_and_degenerate_triangles() {
        let unclamped = SQUARE.replace("3 0 1\n", "3 0 2\n");
        assert!(matches!(Mesh::parse(&unclamped), Err(Error::Mesh(m)) if m.contains("clamped")));
        let flat = Mesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            vec![[0, 1, 2]],
            vec![(0, 1, BoundaryTag::Clamped), (1, 2, BoundaryTag::Traction), (2, 0, BoundaryTag::Contact)],
        );
        assert!(matches!(flat, Err(Error::Mesh(m)) if m.contains("degenerate")));
    }

    #[test]
    fn reports_bad_lines() {
        let bad = SQUARE.replace("1 1\n", "1 x\n");
        let err = Mesh::parse(&bad).unwrap_err();
        assert!(err.to_string().contains("line 5"), "{err}");
    }

    #[test]
    fn rectangle_tags_and_normals() {
        let m = Mesh::rectangle(2.0, 1.0, 4, 2).unwrap();
        assert_eq!(m.triangles().len(), 16);
        assert_eq!(m.edges_tagged(BoundaryTag::Contact).count(), 4);
        assert_eq!(m.edges_tagged(BoundaryTag::Clamped).count(), 2);
        assert!(m.edges_tagged(BoundaryTag::Contact).all(|e| e.normal == [0.0, -1.0]));
        let total: f64 = m.areas().iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }
}
