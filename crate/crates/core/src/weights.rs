//! Graph weights: hyperbolic angle functions on the upper half plane,
//! seeded Monte Carlo estimation of the weight integrals for type `(n, 2)`
//! graphs, a deterministic adaptive quadrature oracle at first order, and a
//! persistent weight table with provenance.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::graphs::{GraphId, KontsevichGraph, VertexRef};
use crate::scalar::{format_rat, parse_rat, Rat, Scalar, WPoly};

/// Default cap on the number of aerial vertices for direct Monte Carlo.
pub const DEFAULT_MC_CAP: usize = 3;

/// Oriented hyperbolic angle at `p` between the vertical geodesic and the
/// geodesic towards `q`: `arg((q - p) / (q - conj(p)))`, in `(-pi, pi]`.
pub fn angle(p: (f64, f64), q: (f64, f64)) -> f64 {
    let a = (q.0 - p.0, q.1 - p.1);
    let b = (q.0 - p.0, q.1 + p.1);
    // arg(a) - arg(b), renormalized.
    let raw = a.1.atan2(a.0) - b.1.atan2(b.0);
    let mut out = raw;
    while out <= -std::f64::consts::PI {
        out += 2.0 * std::f64::consts::PI;
    }
    while out > std::f64::consts::PI {
        out -= 2.0 * std::f64::consts::PI;
    }
    out
}

/// Gradients of the angle with respect to the moving point and the target:
/// `(d/dp, d/dq)`.
pub fn angle_gradients(p: (f64, f64), q: (f64, f64)) -> ([f64; 2], [f64; 2]) {
    let a = (q.0 - p.0, q.1 - p.1);
    let b = (q.0 - p.0, q.1 + p.1);
    let na = a.0 * a.0 + a.1 * a.1;
    let nb = b.0 * b.0 + b.1 * b.1;
    let dp = [a.1 / na - b.1 / nb, -a.0 / na - b.0 / nb];
    let dq = [-a.1 / na + b.1 / nb, a.0 / na - b.0 / nb];
    (dp, dq)
}

/// Configuration of aerial points in the upper half plane; ground anchors
/// are fixed at 0 and 1.
pub type ConfigPoint = Vec<(f64, f64)>;

fn anchor(i: usize) -> (f64, f64) {
    (i as f64, 0.0)
}

/// Value of the weight 2n-form at one configuration: the determinant of the
/// Jacobian of all angle functions, rows ordered by aerial label with the
/// slot-1 form before the slot-2 form, columns `(x_1, y_1, .., x_n, y_n)`.
pub fn integrand(g: &KontsevichGraph, z: &ConfigPoint) -> f64 {
    let n = g.n();
    debug_assert_eq!(z.len(), n);
    let mut jac = vec![0.0f64; (2 * n) * (2 * n)];
    for (k, slot, target) in g.edges() {
        let row = 2 * k + slot;
        let q = match target {
            VertexRef::Ground(i) => anchor(i),
            VertexRef::Aerial(l) => z[l],
        };
        let (dp, dq) = angle_gradients(z[k], q);
        jac[row * 2 * n + 2 * k] += dp[0];
        jac[row * 2 * n + 2 * k + 1] += dp[1];
        if let VertexRef::Aerial(l) = target {
            jac[row * 2 * n + 2 * l] += dq[0];
            jac[row * 2 * n + 2 * l + 1] += dq[1];
        }
    }
    det(&mut jac, 2 * n)
}

fn det(m: &mut [f64], n: usize) -> f64 {
    let mut sign = 1.0;
    let mut out = 1.0;
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if m[row * n + col].abs() > m[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if m[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..n {
                m.swap(col * n + j, pivot * n + j);
            }
            sign = -sign;
        }
        let d = m[col * n + col];
        out *= d;
        for row in (col + 1)..n {
            let f = m[row * n + col] / d;
            for j in col..n {
                m[row * n + j] -= f * m[col * n + j];
            }
        }
    }
    sign * out
}

/// How a weight value was obtained.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMethod {
    Mc,
    Quadrature,
    Table,
}

/// A weight value with statistical error and provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightEstimate {
    pub graph_id: GraphId,
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub method: WeightMethod,
    pub seed: u64,
}

const CHUNK: u64 = 1 << 16;

/// Monte Carlo estimate of the weight of a type `(n, 2)` graph.
///
/// Aerial abscissae are sampled i.i.d. standard Cauchy and ordinates
/// half-Cauchy; the estimator is the Jacobian determinant over the joint
/// density, normalized by `(2 pi)^{2n}`. The sample stream is partitioned
/// into fixed-size chunks with per-chunk derived seeds and reduced in chunk
/// order, so results do not depend on the number of threads.
pub fn weight_mc(
    g: &KontsevichGraph,
    samples: u64,
    seed: u64,
    cap: usize,
) -> Result<WeightEstimate, Error> {
    if g.m() != 2 {
        return Err(Error::InvalidGraph(format!(
            "weights are defined for type (n,2); got m = {}",
            g.m()
        )));
    }
    let n = g.n();
    if n == 0 {
        return Ok(WeightEstimate {
            graph_id: g.id(),
            value: 1.0,
            stderr: 0.0,
            samples: 0,
            method: WeightMethod::Mc,
            seed,
        });
    }
    if n > cap {
        return Err(Error::WeightOrderCap { n, cap });
    }
    assert!(samples >= 2, "at least two samples required");
    let chunks = samples.div_ceil(CHUNK);
    let norm = (2.0 * std::f64::consts::PI).powi(2 * n as i32);
    let stats: Vec<(f64, f64, u64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(samples - c * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c + 1);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let mut z = vec![(0.0, 0.0); n];
            for _ in 0..count {
                let mut density = 1.0;
                for zk in z.iter_mut() {
                    let u: f64 = rng.gen();
                    let v: f64 = rng.gen();
                    let x = (std::f64::consts::PI * (u - 0.5)).tan();
                    let y = (std::f64::consts::FRAC_PI_2 * v).tan();
                    density *= 1.0 / (std::f64::consts::PI * (1.0 + x * x));
                    density *= 2.0 / (std::f64::consts::PI * (1.0 + y * y));
                    *zk = (x, y);
                }
                let mut w = integrand(g, &z) / density / norm;
                if !w.is_finite() {
                    w = 0.0;
                }
                sum += w;
                sumsq += w * w;
            }
            (sum, sumsq, count)
        })
        .collect();
    let (mut sum, mut sumsq, mut count) = (0.0, 0.0, 0u64);
    for (s, s2, c) in stats {
        sum += s;
        sumsq += s2;
        count += c;
    }
    let mean = sum / count as f64;
    let var = ((sumsq - sum * sum / count as f64) / (count as f64 - 1.0)).max(0.0);
    Ok(WeightEstimate {
        graph_id: g.id(),
        value: mean,
        stderr: (var / count as f64).sqrt(),
        samples: count,
        method: WeightMethod::Mc,
        seed,
    })
}

/// Deterministic adaptive quadrature of the weight integral for `n = 1`.
///
/// The half plane is split into half discs around the two anchors
/// (integrated in polar coordinates, where the integrand is smooth) and the
/// remainder (polar around 1/2 with a rational stretch to infinity).
/// Absolute error is at most `1e-6`.
pub fn weight_quadrature_n1(g: &KontsevichGraph) -> Result<WeightEstimate, Error> {
    if g.m() != 2 || g.n() != 1 {
        return Err(Error::InvalidGraph(
            "quadrature oracle handles type (1,2) graphs".into(),
        ));
    }
    let norm = (2.0 * std::f64::consts::PI).powi(2);
    let f = |x: f64, y: f64| -> f64 {
        let v = integrand(g, &vec![(x, y.max(1e-300))]);
        if v.is_finite() {
            v / norm
        } else {
            0.0
        }
    };
    let pi = std::f64::consts::PI;
    let tol = 3e-8;
    // Half disc of radius 1/2 around an anchor.
    let disc = |cx: f64| {
        adaptive_simpson_2d(
            &|r: f64, phi: f64| {
                let rr = r.max(1e-9);
                f(cx + rr * phi.cos(), rr * phi.sin()) * rr
            },
            0.0,
            0.5,
            0.0,
            pi,
            tol,
        )
    };
    // Remainder: polar around 1/2, radius from |cos phi| outward, stretched
    // by t -> R = |cos phi| + t/(1-t).
    let outer = adaptive_simpson_2d(
        &|t: f64, phi: f64| {
            let t = t.min(1.0 - 1e-9);
            let rho = phi.cos().abs();
            let r = rho + t / (1.0 - t);
            let dr = 1.0 / ((1.0 - t) * (1.0 - t));
            f(0.5 + r * phi.cos(), r * phi.sin()) * r * dr
        },
        0.0,
        1.0,
        0.0,
        pi,
        tol,
    );
    Ok(WeightEstimate {
        graph_id: g.id(),
        value: disc(0.0) + disc(1.0) + outer,
        stderr: 1e-6,
        samples: 0,
        method: WeightMethod::Quadrature,
        seed: 0,
    })
}

fn simpson_2d(f: &dyn Fn(f64, f64) -> f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let xs = [x0, 0.5 * (x0 + x1), x1];
    let ys = [y0, 0.5 * (y0 + y1), y1];
    let wx = [1.0, 4.0, 1.0];
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            acc += wx[i] * wx[j] * f(xs[i], ys[j]);
        }
    }
    acc * (x1 - x0) * (y1 - y0) / 36.0
}

fn adaptive_simpson_2d(
    f: &dyn Fn(f64, f64) -> f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    tol: f64,
) -> f64 {
    fn rec(
        f: &dyn Fn(f64, f64) -> f64,
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let xm = 0.5 * (x0 + x1);
        let ym = 0.5 * (y0 + y1);
        let q = [
            simpson_2d(f, x0, xm, y0, ym),
            simpson_2d(f, xm, x1, y0, ym),
            simpson_2d(f, x0, xm, ym, y1),
            simpson_2d(f, xm, x1, ym, y1),
        ];
        let refined: f64 = q.iter().sum();
        if depth == 0 || (refined - whole).abs() < 15.0 * tol {
            return refined + (refined - whole) / 15.0;
        }
        rec(f, x0, xm, y0, ym, q[0], tol / 4.0, depth - 1)
            + rec(f, xm, x1, y0, ym, q[1], tol / 4.0, depth - 1)
            + rec(f, x0, xm, ym, y1, q[2], tol / 4.0, depth - 1)
            + rec(f, xm, x1, ym, y1, q[3], tol / 4.0, depth - 1)
    }
    let whole = simpson_2d(f, x0, x1, y0, y1);
    rec(f, x0, x1, y0, y1, whole, tol, 22)
}

/// Exact or estimated weight value in a table entry.
#[derive(Clone, Debug, PartialEq)]
pub enum WValue {
    Exact(Rat),
    Approx { value: f64, stderr: f64 },
}

impl WValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            WValue::Exact(r) => <f64 as Scalar>::from_rat(r),
            WValue::Approx { value, .. } => *value,
        }
    }

    pub fn stderr(&self) -> f64 {
        match self {
            WValue::Exact(_) => 0.0,
            WValue::Approx { stderr, .. } => *stderr,
        }
    }
}

/// One row of the weight table.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightEntry {
    pub graph_id: GraphId,
    pub value: WValue,
    pub samples: u64,
    pub method: WeightMethod,
    pub seed: u64,
    pub source: Option<String>,
}

impl WeightEntry {
    pub fn from_estimate(e: &WeightEstimate) -> Self {
        WeightEntry {
            graph_id: e.graph_id.clone(),
            value: WValue::Approx {
                value: e.value,
                stderr: e.stderr,
            },
            samples: e.samples,
            method: e.method,
            seed: e.seed,
            source: None,
        }
    }

    pub fn exact(g: &KontsevichGraph, value: Rat, source: &str) -> Self {
        WeightEntry {
            graph_id: g.id(),
            value: WValue::Exact(value),
            samples: 0,
            method: WeightMethod::Table,
            seed: 0,
            source: Some(source.to_string()),
        }
    }
}

/// Persistent cache of weights keyed by graph id. Exact entries override
/// estimates; merging keeps the lowest standard error; conflicting exact
/// values are an error.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightTable {
    entries: BTreeMap<String, WeightEntry>,
}

#[derive(Serialize, Deserialize)]
struct WeightRow {
    graph_id: String,
    value: serde_json::Value,
    #[serde(default)]
    stderr: f64,
    #[serde(default)]
    samples: u64,
    method: WeightMethod,
    #[serde(default)]
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
}

impl WeightTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &GraphId) -> Option<&WeightEntry> {
        self.entries.get(&id.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = &WeightEntry> {
        self.entries.values()
    }

    pub fn insert(&mut self, entry: WeightEntry) -> Result<(), Error> {
        match self.entries.get(&entry.graph_id.0) {
            None => {
                self.entries.insert(entry.graph_id.0.clone(), entry);
            }
            Some(existing) => match (&existing.value, &entry.value) {
                (WValue::Exact(a), WValue::Exact(b)) => {
                    if a != b {
                        return Err(Error::WeightConflict(entry.graph_id.0));
                    }
                }
                (WValue::Exact(_), WValue::Approx { .. }) => {}
                (WValue::Approx { .. }, WValue::Exact(_)) => {
                    self.entries.insert(entry.graph_id.0.clone(), entry);
                }
                (WValue::Approx { stderr: s0, .. }, WValue::Approx { stderr: s1, .. }) => {
                    if s1 < s0 {
                        self.entries.insert(entry.graph_id.0.clone(), entry);
                    }
                }
            },
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &WeightTable) -> Result<(), Error> {
        for e in other.entries.values() {
            self.insert(e.clone())?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<WeightRow> = self
            .entries
            .values()
            .map(|e| WeightRow {
                graph_id: e.graph_id.0.clone(),
                value: match &e.value {
                    WValue::Exact(r) => serde_json::Value::String(format_rat(r)),
                    WValue::Approx { value, .. } => serde_json::json!(value),
                },
                stderr: e.value.stderr(),
                samples: e.samples,
                method: e.method,
                seed: e.seed,
                source: e.source.clone(),
            })
            .collect();
        serde_json::to_value(rows).expect("weight table serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, Error> {
        let rows: Vec<WeightRow> = serde_json::from_value(v.clone())
            .map_err(|e| Error::Parse(format!("weight table: {e}")))?;
        let mut table = WeightTable::new();
        for row in rows {
            let id = GraphId(row.graph_id.clone());
            KontsevichGraph::parse(&id.0)?;
            let value = match &row.value {
                serde_json::Value::String(s) => WValue::Exact(
                    parse_rat(s).ok_or_else(|| Error::Parse(format!("bad rational {s}")))?,
                ),
                serde_json::Value::Number(x) => WValue::Approx {
                    value: x.as_f64().unwrap(),
                    stderr: row.stderr,
                },
                other => {
                    return Err(Error::Parse(format!("bad weight value {other}")));
                }
            };
            table.insert(WeightEntry {
                graph_id: id,
                value,
                samples: row.samples,
                method: row.method,
                seed: row.seed,
                source: row.source,
            })?;
        }
        Ok(table)
    }

    pub fn store(&self, path: &std::path::Path) -> Result<(), Error> {
        let text = serde_json::to_string_pretty(&self.to_json()).expect("serializable");
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json(&v)
    }
}

/// Monte Carlo settings for weights that are not yet in the table.
#[derive(Clone, Copy, Debug)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub cap: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 1_000_000,
            seed: 1,
            cap: DEFAULT_MC_CAP,
        }
    }
}

/// Resolves graph weights as formal symbols plus an assignment.
///
/// A connected graph gets one weight symbol (its graph id); a disconnected
/// graph is represented by the product of its connected factors' symbols,
/// which encodes the factorization property of the weights structurally.
/// Missing values are estimated by Monte Carlo when a configuration is
/// provided.
#[derive(Clone, Debug)]
pub struct WeightResolver {
    pub table: WeightTable,
    pub mc: Option<McConfig>,
}

impl WeightResolver {
    pub fn exact_only(table: WeightTable) -> Self {
        WeightResolver { table, mc: None }
    }

    pub fn with_mc(table: WeightTable, mc: McConfig) -> Self {
        WeightResolver {
            table,
            mc: Some(mc),
        }
    }

    /// Formal weight of a graph as a polynomial in connected-graph symbols,
    /// ensuring every needed symbol has a table entry.
    pub fn wpoly(&mut self, g: &KontsevichGraph) -> Result<WPoly, Error> {
        if g.n() == 0 {
            return Ok(WPoly::constant(Rat::from_integer(1.into())));
        }
        let factorization = g.connected_factorization();
        let mut out = WPoly::constant(Rat::from_integer(1.into()));
        for factor in &factorization.factors {
            self.ensure(factor)?;
            out = out.mul_ref(&WPoly::symbol(&factor.id().0));
        }
        Ok(out)
    }

    fn ensure(&mut self, g: &KontsevichGraph) -> Result<(), Error> {
        if self.table.get(&g.id()).is_some() {
            return Ok(());
        }
        let mc = self.mc.ok_or_else(|| Error::MissingWeight(g.id().0))?;
        // Derive a per-graph seed from the base seed and the graph id so
        // different graphs use independent streams.
        let mut h = 0xcbf29ce484222325u64;
        for b in g.id().0.bytes() {
            h = (h ^ b as u64).wrapping_mul(0x100000001b3);
        }
        let est = weight_mc(g, mc.samples, mc.seed ^ h, mc.cap)?;
        self.table.insert(WeightEntry::from_estimate(&est))
    }

    /// Exact values for every table entry that has one.
    pub fn exact_assignment(&self) -> BTreeMap<String, Rat> {
        self.table
            .entries()
            .filter_map(|e| match &e.value {
                WValue::Exact(r) => Some((e.graph_id.0.clone(), r.clone())),
                _ => None,
            })
            .collect()
    }

    /// Numeric values with standard errors for every table entry.
    pub fn numeric_assignment(&self) -> BTreeMap<String, (f64, f64)> {
        self.table
            .entries()
            .map(|e| (e.graph_id.0.clone(), (e.value.to_f64(), e.value.stderr())))
            .collect()
    }

    /// True when every table entry is exact.
    pub fn all_exact(&self) -> bool {
        self.table
            .entries()
            .all(|e| matches!(e.value, WValue::Exact(_)))
    }
}

/// Evaluate a weight-symbolic value exactly; errors if a symbol is missing.
pub fn eval_exact(w: &WPoly, assignment: &BTreeMap<String, Rat>) -> Result<Rat, Error> {
    w.eval_exact(assignment).ok_or_else(|| {
        Error::MissingWeight(
            w.symbols()
                .iter()
                .find(|s| !assignment.contains_key(s.as_ref()))
                .map(|s| s.to_string())
                .unwrap_or_default(),
        )
    })
}

/// Evaluate a weight-symbolic value numerically with first-order error
/// propagation: returns `(value, stderr)`.
pub fn eval_numeric(
    w: &WPoly,
    assignment: &BTreeMap<String, (f64, f64)>,
) -> Result<(f64, f64), Error> {
    w.eval_propagate(assignment)
        .map(|(v, var)| (v, var.sqrt()))
        .ok_or_else(|| {
            Error::MissingWeight(
                w.symbols()
                    .iter()
                    .find(|s| !assignment.contains_key(s.as_ref()))
                    .map(|s| s.to_string())
                    .unwrap_or_default(),
            )
        })
}
