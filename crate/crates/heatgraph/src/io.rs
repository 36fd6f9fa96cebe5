//! On-disk formats.
//!
//! Graph document (JSON):
//!
//! ```json
//! {
//!   "vertices": [
//!     {"id": "0", "mu": 1.0, "rho": 1.0, "deg": 2.0, "boundary": false}
//!   ],
//!   "edges": [{"u": "0", "v": "1", "w": 1.0}],
//!   "metric": {"kind": "combinatorial",
//!              "pairs": [{"u": "0", "v": "1", "d": 1.0}]}
//! }
//! ```
//!
//! `rho` (per-vertex density), `deg` (ambient weighted degree for truncations
//! of infinite graphs), `boundary` (truncation boundary tag) and the whole
//! `metric` block are optional; `pairs` is required for (and only for) the
//! `explicit` metric kind and must cover all unordered vertex pairs with
//! nonzero distance (missing pairs default to 0). The loader rejects
//! violations with the violated axiom named.
//!
//! Trajectory CSV: header `t,vertex_id,value`, one row per (sample, vertex),
//! with a JSON metadata sidecar. Margin CSV: header
//! `lemma,params,margin,scale,witness,exploratory`. Certificate: JSON.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calculus::VertexFunction;
use crate::certify::GrowthCertificate;
use crate::density::{DensityField, DensityProfile};
use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, WeightedGraph};
use crate::metric::{MetricKind, PseudoMetric};
use crate::solver::{Scheme, Trajectory};
use crate::weights::MarginReport;

#[derive(Debug, Serialize, Deserialize)]
pub struct GraphDoc {
    pub vertices: Vec<VertexDoc>,
    #[serde(default)]
    pub edges: Vec<EdgeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricDoc>,
    /// Named vertex functions (initial data etc.).
    #[serde(default, skip_serializing_if = "HashMap::is_empty")]
    pub functions: HashMap<String, HashMap<String, f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VertexDoc {
    pub id: String,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deg: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub boundary: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub u: String,
    pub v: String,
    pub w: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetricDoc {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<PairDoc>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairDoc {
    pub u: String,
    pub v: String,
    pub d: f64,
}

pub fn graph_from_doc(doc: &GraphDoc) -> Result<(WeightedGraph, Option<DensityField>)> {
    let mut b = GraphBuilder::new();
    for v in &doc.vertices {
        b.add_vertex(v.id.clone(), v.mu)?;
    }
    for e in &doc.edges {
        b.add_edge(&e.u, &e.v, e.w)?;
    }
    for v in &doc.vertices {
        if let Some(deg) = v.deg {
            b.set_ambient_deg(&v.id, deg)?;
        }
        if v.boundary {
            b.set_boundary(&v.id, true)?;
        }
    }
    let g = b.build()?;
    let rho = if doc.vertices.iter().any(|v| v.rho.is_some()) {
        let mut values = vec![0.0; g.n()];
        for v in &doc.vertices {
            let x = g.require_vertex(&v.id)?;
            values[x] = v.rho.ok_or_else(|| {
                Error::Parse(format!("vertex `{}` is missing rho while others set it", v.id))
            })?;
        }
        Some(DensityField::new(values, None)?)
    } else {
        None
    };
    Ok((g, rho))
}

pub fn doc_from_graph(g: &WeightedGraph, rho: Option<&DensityField>, metric: Option<&MetricDoc>) -> GraphDoc {
    let vertices = (0..g.n())
        .map(|x| VertexDoc {
            id: g.label(x).to_string(),
            mu: g.mu(x),
            rho: rho.map(|r| r.rho[x]),
            deg: if (g.ambient_deg(x) - g.deg(x)).abs() > 0.0 {
                Some(g.ambient_deg(x))
            } else {
                None
            },
            boundary: !g.is_interior(x),
        })
        .collect();
    let edges = g
        .edges()
        .into_iter()
        .map(|(x, y, w)| EdgeDoc {
            u: g.label(x).to_string(),
            v: g.label(y).to_string(),
            w,
        })
        .collect();
    GraphDoc {
        vertices,
        edges,
        functions: HashMap::new(),
        metric: metric.map(|m| MetricDoc {
            kind: m.kind.clone(),
            pairs: m.pairs.as_ref().map(|p| {
                p.iter()
                    .map(|q| PairDoc {
                        u: q.u.clone(),
                        v: q.v.clone(),
                        d: q.d,
                    })
                    .collect()
            }),
        }),
    }
}

pub fn load_graph(path: &Path) -> Result<(WeightedGraph, Option<DensityField>, Option<MetricDoc>)> {
    let text = std::fs::read_to_string(path)?;
    let doc: GraphDoc = serde_json::from_str(&text)?;
    let (g, rho) = graph_from_doc(&doc)?;
    Ok((g, rho, doc.metric))
}

pub fn save_graph(path: &Path, doc: &GraphDoc) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Builds the metric a document declares (default: combinatorial).
pub fn metric_from_doc(g: &WeightedGraph, doc: Option<&MetricDoc>) -> Result<PseudoMetric> {
    let Some(doc) = doc else {
        return Ok(PseudoMetric::combinatorial(g));
    };
    match MetricKind::parse(&doc.kind)? {
        MetricKind::Combinatorial => Ok(PseudoMetric::combinatorial(g)),
        MetricKind::CanonicalIntrinsic => Ok(PseudoMetric::canonical_intrinsic(g)),
        MetricKind::Explicit => {
            let pairs = doc.pairs.as_ref().ok_or_else(|| {
                Error::Parse("explicit metric requires a `pairs` table".into())
            })?;
            let n = g.n();
            let mut table = vec![0.0; n * n];
            for p in pairs {
                let u = g.require_vertex(&p.u)?;
                let v = g.require_vertex(&p.v)?;
                table[u * n + v] = p.d;
                table[v * n + u] = p.d;
            }
            PseudoMetric::explicit(g, table)
        }
    }
}

pub fn load_vertex_function(
    doc: &GraphDoc,
    g: &WeightedGraph,
    name: &str,
) -> Result<VertexFunction> {
    let map = doc
        .functions
        .get(name)
        .ok_or_else(|| Error::Parse(format!("no function `{name}` in the document")))?;
    let mut values = vec![0.0; g.n()];
    for (id, &v) in map {
        let x = g.require_vertex(id)?;
        values[x] = v;
    }
    Ok(values)
}

fn fmt_f64(v: f64) -> String {
    // shortest round-trip representation keeps CSV reruns bit-identical
    format!("{v:?}")
}

pub fn trajectory_csv(g: &WeightedGraph, traj: &Trajectory) -> String {
    let mut out = String::from("t,vertex_id,value\n");
    for (k, t) in traj.times.iter().enumerate() {
        for x in 0..g.n() {
            let _ = writeln!(out, "{},{},{}", fmt_f64(*t), g.label(x), fmt_f64(traj.states[k][x]));
        }
    }
    out
}

pub fn parse_trajectory_csv(
    g: &WeightedGraph,
    text: &str,
    scheme: Scheme,
    dt: f64,
) -> Result<Trajectory> {
    let mut times: Vec<f64> = Vec::new();
    let mut states: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != "t,vertex_id,value" {
                return Err(Error::Parse(format!(
                    "line 1: expected header `t,vertex_id,value`, found `{line}`"
                )));
            }
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let (t, id, value) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(Error::Parse(format!("line {}: malformed row", lineno + 1)));
            }
        };
        let t: f64 = t
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad time `{t}`", lineno + 1)))?;
        let value: f64 = value
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad value `{value}`", lineno + 1)))?;
        let x = g.require_vertex(id)?;
        if times.last().map_or(true, |&last| t > last) {
            times.push(t);
            states.push(vec![0.0; g.n()]);
        } else if (times.last().copied().unwrap() - t).abs() > 1e-12 {
            return Err(Error::Parse(format!(
                "line {}: non-monotone time {t}",
                lineno + 1
            )));
        }
        states.last_mut().unwrap()[x] = value;
    }
    if times.is_empty() {
        return Err(Error::Parse("empty trajectory".into()));
    }
    Ok(Trajectory {
        times,
        states,
        scheme,
        dt,
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub scheme: String,
    pub dt: f64,
    pub t_end: f64,
    pub graph: String,
    pub density: String,
    pub seed: u64,
    pub config_hash: String,
}

pub fn margin_csv(rows: &[(String, MarginReport)]) -> String {
    let mut out = String::from("lemma,params,margin,scale,witness,exploratory\n");
    for (params, m) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            m.name,
            params,
            fmt_f64(m.value),
            fmt_f64(m.scale),
            m.witness.clone().unwrap_or_default().replace(',', ";"),
            m.exploratory
        );
    }
    out
}

#[derive(Debug, Serialize)]
pub struct CertificateDoc<'a> {
    pub p: f64,
    pub radii: &'a [f64],
    pub energies: &'a [f64],
    pub beta_limit: f64,
    pub verdict: &'a str,
    pub exp_beta: Option<f64>,
    pub exp_c: Option<f64>,
    pub poly_beta: Option<f64>,
    pub poly_c: Option<f64>,
    pub poly_k: Option<f64>,
    pub gates: Vec<GateDoc>,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Serialize)]
pub struct GateDoc {
    pub gate: &'static str,
    pub applicable: bool,
    pub in_class: Option<bool>,
    pub reason: String,
}

pub fn certificate_json(cert: &GrowthCertificate, seed: u64, config_hash: &str) -> String {
    let doc = CertificateDoc {
        p: cert.p,
        radii: &cert.radii,
        energies: &cert.energies,
        beta_limit: cert.beta_limit,
        verdict: cert.verdict.as_str(),
        exp_beta: cert.exp_fit.map(|f| f.beta),
        exp_c: cert.exp_fit.map(|f| f.c),
        poly_beta: cert.poly_fit.map(|f| f.beta),
        poly_c: cert.poly_fit.map(|f| f.c),
        poly_k: cert.poly_k,
        gates: cert
            .gates
            .iter()
            .map(|g| GateDoc {
                gate: g.gate.as_str(),
                applicable: g.applicable,
                in_class: g.in_class,
                reason: g.reason.clone(),
            })
            .collect(),
        seed,
        config_hash: config_hash.to_string(),
    };
    serde_json::to_string_pretty(&doc).expect("certificate serializes") + "\n"
}

/// Energy curve CSV: `R,E,bound[,exponent]`.
pub fn energy_csv(radii: &[f64], energies: &[f64], bounds: &[f64], exponent: Option<&[f64]>) -> String {
    let mut out = String::from(match exponent {
        Some(_) => "R,E,bound,exponent\n",
        None => "R,E,bound\n",
    });
    for i in 0..radii.len() {
        match exponent {
            Some(f) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    fmt_f64(radii[i]),
                    fmt_f64(energies[i]),
                    fmt_f64(bounds[i]),
                    fmt_f64(f[i])
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    fmt_f64(radii[i]),
                    fmt_f64(energies[i]),
                    fmt_f64(bounds[i])
                );
            }
        }
    }
    out
}

/// Deterministic FNV-1a hash of a canonical config string, hex-encoded.
/// Stable across runs and platforms so reruns embed the same hash.
pub fn config_hash(canonical: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in canonical.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Minimal SVG line chart. Each series is a named list of `(x, y)` points;
/// axes are linear and auto-scaled. The CSV next to it is the source of truth.
pub fn svg_line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const M: f64 = 60.0;
    let finite = |v: f64| v.is_finite();
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (_, pts) in series {
        for &(x, y) in pts {
            if finite(x) && finite(y) {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    let (x0, x1) = min_max(&xs);
    let (y0, y1) = min_max(&ys);
    let sx = |x: f64| M + (x - x0) / (x1 - x0).max(1e-300) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0).max(1e-300) * (H - 2.0 * M);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
    let mut out = String::new();
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    );
    let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{title}</text>",
        W / 2.0
    );
    // axes
    let _ = writeln!(
        out,
        "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        H - M,
        W - M,
        H - M
    );
    let _ = writeln!(
        out,
        "<line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>",
        H - M
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{x_label}</text>",
        W / 2.0,
        H - 16.0
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{y_label}</text>",
        H / 2.0,
        H / 2.0
    );
    for (i, bound) in [(0usize, (x0, y0)), (1usize, (x1, y1))] {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{:.3e}</text>",
            if i == 0 { M } else { W - M - 40.0 },
            H - M + 14.0,
            bound.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{:.3e}</text>",
            4.0,
            if i == 0 { H - M } else { M },
            bound.1
        );
    }
    for (si, (name, pts)) in series.iter().enumerate() {
        let color = colors[si % colors.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|(x, y)| finite(*x) && finite(*y))
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                out,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                path.join(" ")
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{name}</text>",
            W - M - 120.0,
            M + 16.0 * si as f64
        );
    }
    out.push_str("</svg>\n");
    out
}

fn min_max(vals: &[f64]) -> (f64, f64) {
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() && lo < hi {
        (lo, hi)
    } else if lo.is_finite() {
        (lo - 1.0, lo + 1.0)
    } else {
        (0.0, 1.0)
    }
}

/// Density profile in CLI/metadata notation: `const:<rho0>` or
/// `vanishing:<rho0>,<sigma>,<k>`.
pub fn density_spec_string(profile: &DensityProfile) -> String {
    match profile {
        DensityProfile::BoundedBelow { rho0 } => format!("const:{rho0}"),
        DensityProfile::Vanishing {
            rho0, sigma, k, ..
        } => format!("vanishing:{rho0},{sigma},{k}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::families::*;

    #[test]
    fn graph_doc_round_trip() {
        let g = z_segment(3);
        let rho = DensityField::constant(&g, 0.5).unwrap();
        let doc = doc_from_graph(&g, Some(&rho), None);
        let text = serde_json::to_string(&doc).unwrap();
        let parsed: GraphDoc = serde_json::from_str(&text).unwrap();
        let (g2, rho2) = graph_from_doc(&parsed).unwrap();
        assert_eq!(g2.n(), g.n());
        assert_eq!(g2.edge_count(), g.edge_count());
        assert_eq!(rho2.unwrap().rho, rho.rho);
        let end = g2.vertex("3").unwrap();
        assert!(!g2.is_interior(end));
        assert_eq!(g2.ambient_deg(end), 2.0);
    }

    #[test]
    fn asymmetric_edge_file_rejected() {
        let text = r#"{
            "vertices": [{"id": "a", "mu": 1.0}, {"id": "b", "mu": 1.0}],
            "edges": [{"u": "a", "v": "b", "w": 2.0}, {"u": "b", "v": "a", "w": 3.0}]
        }"#;
        let doc: GraphDoc = serde_json::from_str(text).unwrap();
        let err = graph_from_doc(&doc).unwrap_err();
        assert!(err.to_string().contains("symmetry"), "{err}");
    }

    #[test]
    fn trajectory_csv_round_trip() {
        use crate::solver::{solve, SolveOptions, Source};
        let g = pair();
        let rho = DensityField::constant(&g, 1.0).unwrap();
        let traj = solve(
            &g,
            &rho,
            &[1.0, 0.0],
            Source::Zero,
            &SolveOptions::new(Scheme::ImplicitEuler, 0.25, 1.0),
        )
        .unwrap();
        let csv = trajectory_csv(&g, &traj);
        let parsed = parse_trajectory_csv(&g, &csv, Scheme::ImplicitEuler, 0.25).unwrap();
        assert_eq!(parsed.times, traj.times);
        assert_eq!(parsed.states, traj.states);
        // serialization is deterministic
        assert_eq!(csv, trajectory_csv(&g, &traj));
    }

    #[test]
    fn explicit_metric_from_doc() {
        let g = pair();
        let doc = MetricDoc {
            kind: "explicit".into(),
            pairs: Some(vec![PairDoc {
                u: "a".into(),
                v: "b".into(),
                d: 3.5,
            }]),
        };
        let m = metric_from_doc(&g, Some(&doc)).unwrap();
        assert_eq!(m.jump_size(), 3.5);
    }

    #[test]
    fn config_hash_is_stable() {
        assert_eq!(config_hash("abc"), config_hash("abc"));
        assert_ne!(config_hash("abc"), config_hash("abd"));
    }

    #[test]
    fn svg_chart_renders() {
        let svg = svg_line_chart(
            "energy",
            "R",
            "E",
            &[("E".to_string(), vec![(1.0, 2.0), (2.0, 3.0), (3.0, 10.0)])],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn vertex_function_loading() {
        let g = z_segment(2);
        let mut doc = doc_from_graph(&g, None, None);
        doc.functions.insert(
            "u0".into(),
            [("0".to_string(), 1.0), ("1".to_string(), -0.5)]
                .into_iter()
                .collect(),
        );
        let f = load_vertex_function(&doc, &g, "u0").unwrap();
        assert_eq!(f[g.vertex("0").unwrap()], 1.0);
        assert_eq!(f[g.vertex("1").unwrap()], -0.5);
        assert_eq!(f[g.vertex("-2").unwrap()], 0.0);
        assert!(load_vertex_function(&doc, &g, "missing").is_err());
    }
}
