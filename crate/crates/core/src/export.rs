//! Text output shared by every module: OBJ meshes, CSV tables and a
//! round-trip float format.

use std::fmt::Write as _;

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Polygon mesh with 0-based face indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<Vec<usize>>,
}

impl Mesh {
    /// Wavefront OBJ with `v` and `f` records only.
    pub fn to_obj(&self) -> String {
        let mut s = String::with_capacity(64 * (self.vertices.len() + self.faces.len()));
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", fmt_num(v[0]), fmt_num(v[1]), fmt_num(v[2]));
        }
        for f in &self.faces {
            s.push('f');
            for i in f {
                let _ = write!(s, " {}", i + 1);
            }
            s.push('\n');
        }
        s
    }

    /// Quad mesh of a `rows × cols` vertex grid stored row-major; cells with a
    /// missing corner are dropped.
    pub fn from_grid(rows: usize, cols: usize, grid: &[Option<[f64; 3]>]) -> Self {
        assert_eq!(grid.len(), rows * cols);
        let mut index = vec![usize::MAX; grid.len()];
        let mut vertices = Vec::new();
        for (k, p) in grid.iter().enumerate() {
            if let Some(p) = p {
                index[k] = vertices.len();
                vertices.push(*p);
            }
        }
        let mut faces = Vec::new();
        for r in 0..rows.saturating_sub(1) {
            for c in 0..cols.saturating_sub(1) {
                let q = [r * cols + c, r * cols + c + 1, (r + 1) * cols + c + 1, (r + 1) * cols + c];
                if q.iter().all(|&k| index[k] != usize::MAX) {
                    faces.push(q.iter().map(|&k| index[k]).collect());
                }
            }
        }
        Mesh { vertices, faces }
    }
}

/// Renders a header and rows of numbers as CSV.
pub fn csv_table<R: AsRef<[f64]>>(header: &[&str], rows: &[R]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.as_ref().iter().map(|&x| fmt_num(x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
