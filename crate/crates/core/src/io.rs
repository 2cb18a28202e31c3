//! Bit-stable JSON and CSV output.
//!
//! Floats are written with 17 significant digits in scientific notation,
//! which round-trips every `f64`. Struct fields keep declaration order and
//! lines end in `\n` on every platform.

use std::fs;
use std::io;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::analysis::level::LevelCurve;
use crate::error::{Error, Result};
use crate::fem::{Discretization, Field};
use crate::tree::{Mesh, RadialGrid};

/// `{:.16e}` with a trailing `.0`-free mantissa, e.g. `1.1548912501099352e-1`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON whose floats use [`format_float`].
struct FixedFloats<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format_float(v).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` to pretty JSON with fixed-precision floats and a
/// trailing newline. Non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloats(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Config(format!("cannot serialize output: {e}")))?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Header of [`level_curve_csv`].
pub const LEVEL_CURVE_HEADER: &str = "mu,energy,lambda,sup_norm,converged";

pub fn level_curve_csv(curve: &LevelCurve) -> String {
    let mut s = String::from(LEVEL_CURVE_HEADER);
    s.push('\n');
    for p in &curve.points {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            format_float(p.mu),
            format_float(p.energy),
            format_float(p.lambda),
            format_float(p.sup_norm),
            p.converged
        ));
    }
    s
}

/// `edge,s,value` for every node of every edge; `s` is the arc length from
/// the end nearer the root. Edge 0 of an unrooted tree starts at the center.
pub fn mesh_profile_csv(mesh: &Mesh, u: &Field) -> Result<String> {
    check_len(mesh, u)?;
    let nodes = u.node_values(mesh);
    let h = mesh.h();
    let mut s = String::from("edge,s,value\n");
    for e in 0..mesh.tree.edges.len() {
        for k in 0..=mesh.nodes_per_edge {
            s.push_str(&format!(
                "{e},{},{}\n",
                format_float(k as f64 * h),
                format_float(nodes[mesh.edge_node(e, k)])
            ));
        }
    }
    Ok(s)
}

/// `t,value` along a radial grid.
pub fn radial_profile_csv(grid: &RadialGrid, u: &Field) -> Result<String> {
    check_len(grid, u)?;
    let nodes = u.node_values(grid);
    let mut s = String::from("t,value\n");
    for (i, v) in nodes.iter().enumerate() {
        s.push_str(&format!("{},{}\n", format_float(grid.coordinate(i)), format_float(*v)));
    }
    Ok(s)
}

fn check_len(domain: &impl Discretization, u: &Field) -> Result<()> {
    if u.len() == domain.elements().dof_count() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "field has {} values but the discretization has {} unknowns",
            u.len(),
            domain.elements().dof_count()
        )))
    }
}

/// Reads nodal values written by [`mesh_profile_csv`] or [`radial_profile_csv`]
/// (last column) back into a field on `domain`, node by node in file order.
pub fn read_profile_csv(path: &Path, domain: &impl Discretization, node_order: &[usize]) -> Result<Field> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut nodes = vec![0.0; domain.elements().node_count()];
    let mut rows = text.lines().skip(1).filter(|l| !l.is_empty());
    for &node in node_order {
        let line = rows.next().ok_or_else(|| parse_err("too few rows".into()))?;
        let last = line.rsplit(',').next().unwrap_or("");
        nodes[node] = last
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad value {last:?}: {e}")))?;
    }
    if rows.next().is_some() {
        return Err(parse_err("too many rows".into()));
    }
    Field::from_nodes(domain, &nodes)
}

/// Node order of [`mesh_profile_csv`].
pub fn mesh_profile_order(mesh: &Mesh) -> Vec<usize> {
    (0..mesh.tree.edges.len())
        .flat_map(|e| (0..=mesh.nodes_per_edge).map(move |k| mesh.edge_node(e, k)))
        .collect()
}

/// Node order of [`radial_profile_csv`].
pub fn radial_profile_order(grid: &RadialGrid) -> Vec<usize> {
    (0..grid.node_count()).collect()
}
