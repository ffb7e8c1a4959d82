//! Morse–Bott chain complexes assembled from critical-manifold data with
//! mod-2 cascade counts, the periodic pearl complexes of twisted
//! Rabinowitz–Floer homology over GF(2) together with their free cyclic
//! quotients, and a 2-D gradient-shooting oracle that validates cascade
//! parities on surfaces of revolution.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::z2complex::{
    ComplexError, DegreeAction, Gf2Matrix, GradedComplexZ2, PeriodicComplexZ2,
};

/// Directions sampled on an unstable sphere by the 2-D cascade oracle.
pub const ORACLE_DIRECTIONS: usize = 720;

const ORACLE_DT: f64 = 5e-3;
const ORACLE_MAX_STEPS: usize = 40_000;
const ORACLE_SETTLE: f64 = 1e-12;
const ORACLE_CLUSTER_TOL: f64 = 1e-3;
const ORACLE_OFFSET: f64 = 1e-3;
const ORACLE_ANGLE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MbError {
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("morse point `{point}` references unknown component `{comp}`")]
    UnknownComponent { point: String, comp: String },
    #[error("cascade references unknown point `{0}`")]
    UnknownPoint(String),
    #[error("duplicate cascade entry {from} -> {to}")]
    DuplicateCascade { from: String, to: String },
    #[error("cascade parity {parity} for {from} -> {to} is not a mod-2 count")]
    BadParity { from: String, to: String, parity: u8 },
    #[error("cascade {from} -> {to} drops the grading by {drop}, not 1")]
    BadGradingDrop { from: String, to: String, drop: i64 },
    #[error("cascade {from} -> {to} ascends the component values ({src} < {tgt})")]
    ValueAscends {
        from: String,
        to: String,
        src: f64,
        tgt: f64,
    },
    #[error("need n >= 2, got {0}")]
    BadDimension(usize),
    #[error("need order m >= 1, got {0}")]
    BadOrder(usize),
    #[error("expected {expected} rotation exponents, got {got}")]
    ExponentCount { expected: usize, got: usize },
    #[error("rotation exponent {0} is not coprime to the order {1}")]
    ExponentNotCoprime(i64, usize),
    #[error("unknown critical point `{0}` for this model")]
    UnknownModelPoint(String),
    #[error("gradient shooting left the chart after {0} steps")]
    ShootingDiverged(usize),
    #[error("arrival clustering is ambiguous at {0} directions")]
    AmbiguousClustering(usize),
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

/// Connected critical component: a constant value of the ambient function
/// and the transverse Morse index contributed to every point on it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Component {
    pub label: String,
    pub f: f64,
    pub offset: i64,
}

/// Critical point of the auxiliary Morse function on one component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorsePoint {
    pub comp: String,
    pub label: String,
    pub h_index: i64,
}

/// Mod-2 count of isolated cascade trajectories between two points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cascade {
    pub from: String,
    pub to: String,
    pub parity: u8,
}

/// Critical data for a Morse–Bott complex: components with auxiliary Morse
/// points, graded by `component.offset + point.h_index`, and cascade counts
/// supplied externally (pinned, oracle-derived, or user data).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorseBottDatum {
    pub components: Vec<Component>,
    pub points: Vec<MorsePoint>,
    pub cascades: Vec<Cascade>,
}

impl MorseBottDatum {
    /// Checks label consistency and the cascade admissibility rules: a
    /// nonzero count needs a grading drop of exactly 1 and a source
    /// component value at least the target's.
    pub fn validate(&self) -> Result<(), MbError> {
        let mut comp_values = BTreeMap::new();
        let mut comp_offsets = BTreeMap::new();
        for c in &self.components {
            if comp_values.insert(c.label.clone(), c.f).is_some() {
                return Err(MbError::DuplicateLabel(c.label.clone()));
            }
            comp_offsets.insert(c.label.clone(), c.offset);
        }
        let mut gradings = BTreeMap::new();
        let mut values = BTreeMap::new();
        for p in &self.points {
            let Some(&offset) = comp_offsets.get(&p.comp) else {
                return Err(MbError::UnknownComponent {
                    point: p.label.clone(),
                    comp: p.comp.clone(),
                });
            };
            if gradings.insert(p.label.clone(), offset + p.h_index).is_some() {
                return Err(MbError::DuplicateLabel(p.label.clone()));
            }
            values.insert(p.label.clone(), comp_values[&p.comp]);
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.cascades {
            for end in [&c.from, &c.to] {
                if !gradings.contains_key(end) {
                    return Err(MbError::UnknownPoint(end.clone()));
                }
            }
            if !seen.insert((c.from.clone(), c.to.clone())) {
                return Err(MbError::DuplicateCascade {
                    from: c.from.clone(),
                    to: c.to.clone(),
                });
            }
            if c.parity > 1 {
                return Err(MbError::BadParity {
                    from: c.from.clone(),
                    to: c.to.clone(),
                    parity: c.parity,
                });
            }
            if c.parity == 0 {
                continue;
            }
            let drop = gradings[&c.from] - gradings[&c.to];
            if drop != 1 {
                return Err(MbError::BadGradingDrop {
                    from: c.from.clone(),
                    to: c.to.clone(),
                    drop,
                });
            }
            if values[&c.from] < values[&c.to] {
                return Err(MbError::ValueAscends {
                    from: c.from.clone(),
                    to: c.to.clone(),
                    src: values[&c.from],
                    tgt: values[&c.to],
                });
            }
        }
        Ok(())
    }
}

/// Assembles the graded complex of a datum. Gradings are
/// `offset + h_index`; the boundary matrix entry at `(target, source)` is
/// the cascade parity. `∂² = 0` is verified on construction.
pub fn build_complex(datum: &MorseBottDatum) -> Result<GradedComplexZ2, MbError> {
    datum.validate()?;
    let offsets: BTreeMap<&str, i64> = datum
        .components
        .iter()
        .map(|c| (c.label.as_str(), c.offset))
        .collect();
    let mut by_degree: BTreeMap<i64, Vec<&str>> = BTreeMap::new();
    let mut position = BTreeMap::new();
    for p in &datum.points {
        let k = offsets[p.comp.as_str()] + p.h_index;
        let bucket = by_degree.entry(k).or_default();
        position.insert(p.label.as_str(), (k, bucket.len()));
        bucket.push(p.label.as_str());
    }
    let (lo, hi) = match (by_degree.keys().next(), by_degree.keys().next_back()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Ok(GradedComplexZ2::new(0, Vec::new(), BTreeMap::new(), None)?),
    };
    let dim = |k: i64| by_degree.get(&k).map_or(0, Vec::len);
    let dims = (lo..=hi).map(dim).collect();
    let mut boundaries: BTreeMap<i64, Gf2Matrix> = BTreeMap::new();
    for c in &datum.cascades {
        if c.parity == 0 {
            continue;
        }
        let (k, col) = position[c.from.as_str()];
        let (_, row) = position[c.to.as_str()];
        boundaries
            .entry(k)
            .or_insert_with(|| Gf2Matrix::zeros(dim(k - 1), dim(k)))
            .set(row, col, true);
    }
    let labels = by_degree
        .iter()
        .map(|(&k, names)| (k, names.iter().map(|s| s.to_string()).collect()))
        .collect();
    Ok(GradedComplexZ2::new(lo, dims, boundaries, Some(labels))?)
}

/// One nondegenerate minimum; its homology is a single class in degree 0.
pub fn single_minimum_datum() -> MorseBottDatum {
    MorseBottDatum {
        components: vec![Component {
            label: "min".into(),
            f: 0.0,
            offset: 0,
        }],
        points: vec![MorsePoint {
            comp: "min".into(),
            label: "min".into(),
            h_index: 0,
        }],
        cascades: Vec::new(),
    }
}

/// The odd sphere `S^{2n−1}` as `n` critical circles at transverse indices
/// `0, 2, …, 2(n−1)`, each carrying a two-point circle Morse function.
/// Consecutive circles are linked by a single cascade from the upper
/// minimum to the lower maximum; within a circle the two gradient arcs
/// cancel mod 2.
pub fn sphere_datum(n: usize) -> MorseBottDatum {
    assert!(n >= 1);
    let mut components = Vec::new();
    let mut points = Vec::new();
    let mut cascades = Vec::new();
    for j in 0..n {
        components.push(Component {
            label: format!("circle{j}"),
            f: j as f64,
            offset: 2 * j as i64,
        });
        points.push(MorsePoint {
            comp: format!("circle{j}"),
            label: format!("min{j}"),
            h_index: 0,
        });
        points.push(MorsePoint {
            comp: format!("circle{j}"),
            label: format!("max{j}"),
            h_index: 1,
        });
        if j > 0 {
            cascades.push(Cascade {
                from: format!("min{j}"),
                to: format!("max{}", j - 1),
                parity: 1,
            });
        }
    }
    MorseBottDatum {
        components,
        points,
        cascades,
    }
}

/// The deformed sphere whose height function has one critical circle and
/// four nondegenerate points. Boundary matrices in the listed basis order
/// are `(1 1; 0 0)` and `(0 1; 0 1)`, with homology `(1, 0, 1)`.
pub fn teapot_datum() -> MorseBottDatum {
    let comp = |label: &str, f: f64, offset: i64| Component {
        label: label.into(),
        f,
        offset,
    };
    let pt = |comp: &str, label: &str, h_index: i64| MorsePoint {
        comp: comp.into(),
        label: label.into(),
        h_index,
    };
    let edge = |from: &str, to: &str| Cascade {
        from: from.into(),
        to: to.into(),
        parity: 1,
    };
    MorseBottDatum {
        components: vec![
            comp("base", 0.0, 0),
            comp("bowl", 0.35, 0),
            comp("handle", 0.65, 1),
            comp("lid", 1.0, 2),
            comp("spout", 0.8, 2),
        ],
        points: vec![
            pt("base", "base", 0),
            pt("bowl", "bowl_min", 0),
            pt("bowl", "bowl_max", 1),
            pt("handle", "handle", 0),
            pt("lid", "lid", 0),
            pt("spout", "spout", 0),
        ],
        cascades: vec![
            edge("lid", "bowl_max"),
            edge("spout", "bowl_max"),
            edge("handle", "base"),
            edge("handle", "bowl_min"),
        ],
    }
}

/// Parameters of the twisted sphere computation: ambient `C^n`, a rotation
/// of finite order `m` with one exponent per coordinate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RfhSphereSpec {
    pub n: usize,
    pub m: usize,
    pub exponents: Vec<i64>,
}

impl RfhSphereSpec {
    /// The rotation acting by the same primitive root in every coordinate.
    pub fn standard(n: usize, m: usize) -> Self {
        RfhSphereSpec {
            n,
            m,
            exponents: vec![1; n],
        }
    }

    /// `n ≥ 2`, `m ≥ 1`, one exponent per coordinate, each coprime to `m`
    /// so that the action on the sphere is free.
    pub fn validate(&self) -> Result<(), MbError> {
        if self.n < 2 {
            return Err(MbError::BadDimension(self.n));
        }
        if self.m == 0 {
            return Err(MbError::BadOrder(self.m));
        }
        if self.exponents.len() != self.n {
            return Err(MbError::ExponentCount {
                expected: self.n,
                got: self.exponents.len(),
            });
        }
        for &k in &self.exponents {
            let r = k.rem_euclid(self.m as i64) as u64;
            if gcd(r, self.m as u64) != 1 {
                return Err(MbError::ExponentNotCoprime(k, self.m));
            }
        }
        Ok(())
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn sphere_pearls(spec: &RfhSphereSpec, odd_linking: bool) -> Result<PeriodicComplexZ2, MbError> {
    spec.validate()?;
    let n = spec.n;
    let pearl = MorseBottDatum {
        components: vec![Component {
            label: "pearl".into(),
            f: 0.0,
            offset: 0,
        }],
        points: vec![
            MorsePoint {
                comp: "pearl".into(),
                label: "min".into(),
                h_index: 0,
            },
            MorsePoint {
                comp: "pearl".into(),
                label: "max".into(),
                h_index: 2 * n as i64 - 1,
            },
        ],
        cascades: Vec::new(),
    };
    let block = build_complex(&pearl)?;
    let linking = if odd_linking {
        Gf2Matrix::ones(1, 1)
    } else {
        Gf2Matrix::zeros(1, 1)
    };
    Ok(PeriodicComplexZ2::new(2 * n as i64, block, linking)?)
}

/// String-of-pearls complex of the twisted sphere: one sphere Morse complex
/// per period, pearl `k` graded at `2kn + h_index`, and a single odd
/// linking cascade from each minimum to the maximum one period below. The
/// assembly is independent of the exponents beyond validation: every
/// admissible rotation yields an isomorphic critical manifold.
pub fn rfh_sphere_complex(spec: &RfhSphereSpec) -> Result<PeriodicComplexZ2, MbError> {
    sphere_pearls(spec, true)
}

/// Negative control for [`rfh_sphere_complex`]: an even seam count. The
/// resulting homology is nonzero, which is exactly the contradiction that
/// pins the odd parity for a displaceable hypersurface.
pub fn rfh_sphere_complex_even_linking(
    spec: &RfhSphereSpec,
) -> Result<PeriodicComplexZ2, MbError> {
    sphere_pearls(spec, false)
}

/// The all-ones linking matrix between two size-`m` circle fibres.
pub fn ladder_all_ones(m: usize) -> Gf2Matrix {
    Gf2Matrix::ones(m, m)
}

/// Circle Morse boundary for `m` maxima over `m` minima: identity plus
/// cyclic shift. Over GF(2) the two coincide at `m = 1` and the matrix
/// vanishes; every row has exactly two ones otherwise, so the all-ones
/// vector always lies in the kernel.
pub fn ladder_cyclic(m: usize) -> Gf2Matrix {
    Gf2Matrix::from_fn(m, m, |i, j| (i == j) ^ (i == (j + 1) % m))
}

/// Equivariant refinement of the pearl complex for the order-`m` rotation:
/// each circle fibre carries `m` maxima and `m` minima, the within-circle
/// boundary is [`ladder_cyclic`] at odd degrees, and circle-to-circle plus
/// seam boundaries are [`ladder_all_ones`] at even degrees.
pub fn rope_ladder_complex(n: usize, m: usize) -> Result<PeriodicComplexZ2, MbError> {
    if n < 2 {
        return Err(MbError::BadDimension(n));
    }
    if m == 0 {
        return Err(MbError::BadOrder(m));
    }
    let span = 2 * n as i64;
    let dims = vec![m; 2 * n];
    let boundaries = (1..span)
        .map(|k| {
            let matrix = if k % 2 == 1 {
                ladder_cyclic(m)
            } else {
                ladder_all_ones(m)
            };
            (k, matrix)
        })
        .collect();
    let block = GradedComplexZ2::new(0, dims, boundaries, None)?;
    Ok(PeriodicComplexZ2::new(span, block, ladder_all_ones(m))?)
}

fn cyclic_action(n: usize, m: usize) -> DegreeAction {
    let perm = (0..m).map(|i| (i + 1) % m).collect();
    DegreeAction::uniform(m, 0..=(2 * n as i64 - 1), perm)
}

/// Quotient complex written out directly: one generator per degree, zero
/// maps out of odd degrees, multiplication by `m mod 2` out of even ones.
/// Used as the independent cross-check for the quotient construction.
pub fn lens_quotient_displayed(n: usize, m: usize) -> Result<PeriodicComplexZ2, MbError> {
    if n < 2 {
        return Err(MbError::BadDimension(n));
    }
    if m == 0 {
        return Err(MbError::BadOrder(m));
    }
    let span = 2 * n as i64;
    let parity = Gf2Matrix::from_fn(1, 1, |_, _| m % 2 == 1);
    let boundaries = (1..span)
        .map(|k| {
            let matrix = if k % 2 == 1 {
                Gf2Matrix::zeros(1, 1)
            } else {
                parity.clone()
            };
            (k, matrix)
        })
        .collect();
    let block = GradedComplexZ2::new(0, vec![1; 2 * n], boundaries, None)?;
    Ok(PeriodicComplexZ2::new(span, block, parity)?)
}

/// Homology of the lens-space quotient per degree of one full period
/// (degrees `0..2n−1`; all other degrees repeat periodically). Builds the
/// rope ladder, quotients by the free cyclic action, and reads off the
/// middle period of a three-period window.
pub fn rfh_lens_homology(spec: &RfhSphereSpec) -> Result<BTreeMap<i64, usize>, MbError> {
    spec.validate()?;
    let span = 2 * spec.n as i64;
    let ladder = rope_ladder_complex(spec.n, spec.m)?;
    let quotient = ladder.quotient_by_action(&cyclic_action(spec.n, spec.m))?;
    let dims = quotient.periodic_homology_dims(-span, 2 * span - 1)?;
    Ok(dims.into_iter().filter(|&(k, _)| (0..span).contains(&k)).collect())
}

/// Mod-2 Betti numbers of the fixed-point set of the twist, indexed by
/// degree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointSpec {
    pub betti: Vec<usize>,
}

/// Homology dims read off a fixed-point set, with the reason they pass
/// through unchanged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointRfh {
    pub dims: BTreeMap<i64, usize>,
    pub note: String,
}

/// When the only invariant orbits are the constant loops at fixed points,
/// the homology equals the fixed-point homology verbatim: the action
/// functional vanishes on every generator and strictly decreases along
/// nonconstant trajectories, so the boundary operator is zero.
pub fn fixed_point_rfh(spec: &FixedPointSpec) -> FixedPointRfh {
    FixedPointRfh {
        dims: spec
            .betti
            .iter()
            .enumerate()
            .map(|(k, &b)| (k as i64, b))
            .collect(),
        note: "all generators are constant loops; the action functional is zero \
               on them and strictly decreases along nonconstant flow lines, so \
               no connecting trajectory exists and the boundary vanishes"
            .into(),
    }
}

/// Degree-to-dimension table as a compact JSON object with stringified
/// degree keys.
pub fn dims_to_json(dims: &BTreeMap<i64, usize>) -> String {
    let map: serde_json::Map<String, serde_json::Value> = dims
        .iter()
        .map(|(k, &v)| (k.to_string(), serde_json::Value::from(v)))
        .collect();
    serde_json::Value::Object(map).to_string()
}

/// Degree-to-dimension table as a two-column markdown table.
pub fn dims_to_markdown(dims: &BTreeMap<i64, usize>) -> String {
    let mut out = String::from("| degree | dim |\n|---|---|\n");
    for (k, v) in dims {
        out.push_str(&format!("| {k} | {v} |\n"));
    }
    out
}

/// Built-in 2-D gradient systems for the cascade oracle, both surfaces of
/// revolution carrying their height function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CascadeModel2d {
    /// Round sphere: two nondegenerate poles, no index-1 points.
    RoundSphere,
    /// Profile with slope `s(1−s)(2−s)(3−s)` on `[0,3]`: bottom pole, rim
    /// circle, groove circle, apex. Circle Morse points aligned at angles
    /// `0` (max) and `π` (min).
    TeapotProfile,
}

#[derive(Clone, Copy, PartialEq)]
enum PointKind {
    Pole { unstable: usize },
    Circle { h_index: i64, theta: f64 },
}

#[derive(Clone, Copy)]
struct ModelPoint {
    label: &'static str,
    critical: usize,
    grading: i64,
    kind: PointKind,
}

struct ProfileSystem {
    critical_s: &'static [f64],
    slope: fn(f64) -> f64,
    metric: fn(f64) -> f64,
    points: Vec<ModelPoint>,
}

fn teapot_slope(s: f64) -> f64 {
    s * (1.0 - s) * (2.0 - s) * (3.0 - s)
}

fn teapot_metric(s: f64) -> f64 {
    let radius_slope = PI / 3.0 * (PI * s / 3.0).cos();
    teapot_slope(s).powi(2) + radius_slope * radius_slope
}

fn round_slope(s: f64) -> f64 {
    s.sin()
}

fn round_metric(_: f64) -> f64 {
    1.0
}

const TEAPOT_CRITICAL_S: [f64; 4] = [0.0, 1.0, 2.0, 3.0];
const ROUND_CRITICAL_S: [f64; 2] = [0.0, PI];

impl CascadeModel2d {
    fn system(&self) -> ProfileSystem {
        let pole = |label, critical, grading, unstable| ModelPoint {
            label,
            critical,
            grading,
            kind: PointKind::Pole { unstable },
        };
        let circle = |label, critical, grading, h_index, theta| ModelPoint {
            label,
            critical,
            grading,
            kind: PointKind::Circle { h_index, theta },
        };
        match self {
            CascadeModel2d::RoundSphere => ProfileSystem {
                critical_s: &ROUND_CRITICAL_S,
                slope: round_slope,
                metric: round_metric,
                points: vec![pole("min", 0, 0, 0), pole("max", 1, 2, 2)],
            },
            CascadeModel2d::TeapotProfile => ProfileSystem {
                critical_s: &TEAPOT_CRITICAL_S,
                slope: teapot_slope,
                metric: teapot_metric,
                points: vec![
                    pole("base", 0, 0, 0),
                    circle("groove_min", 2, 0, 0, PI),
                    circle("groove_max", 2, 1, 1, 0.0),
                    circle("rim_min", 1, 1, 0, PI),
                    circle("rim_max", 1, 2, 1, 0.0),
                    pole("apex", 3, 2, 2),
                ],
            },
        }
    }

    /// Labels and total gradings of the model's critical points.
    pub fn critical_points(&self) -> Vec<(&'static str, i64)> {
        self.system()
            .points
            .iter()
            .map(|p| (p.label, p.grading))
            .collect()
    }
}

/// Integrates the profile gradient flow until the arc parameter settles,
/// then snaps to the nearest critical value.
fn settle(system: &ProfileSystem, s0: f64) -> Result<usize, MbError> {
    let rate = |s: f64| -(system.slope)(s) / (system.metric)(s);
    let span = *system.critical_s.last().expect("nonempty critical list");
    let mut s = s0;
    for _ in 0..ORACLE_MAX_STEPS {
        let k1 = rate(s);
        let k2 = rate(s + 0.5 * ORACLE_DT * k1);
        let k3 = rate(s + 0.5 * ORACLE_DT * k2);
        let k4 = rate(s + ORACLE_DT * k3);
        let ds = ORACLE_DT / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        s += ds;
        if !(-0.5..=span + 0.5).contains(&s) {
            return Err(MbError::ShootingDiverged(ORACLE_MAX_STEPS));
        }
        if ds.abs() < ORACLE_SETTLE {
            break;
        }
    }
    let (best, dist) = system
        .critical_s
        .iter()
        .enumerate()
        .map(|(i, &c)| (i, (s - c).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty critical list");
    if dist > ORACLE_CLUSTER_TOL {
        return Err(MbError::AmbiguousClustering(ORACLE_DIRECTIONS));
    }
    Ok(best)
}

/// Starting parameters just off a critical level on its strictly
/// descending sides.
fn unstable_sides(system: &ProfileSystem, critical: usize) -> Vec<f64> {
    let s_star = system.critical_s[critical];
    let span = *system.critical_s.last().expect("nonempty critical list");
    let mut sides = Vec::new();
    for delta in [-ORACLE_OFFSET, ORACLE_OFFSET] {
        let s = s_star + delta;
        if !(0.0..=span).contains(&s) {
            continue;
        }
        if -(system.slope)(s) * delta > 0.0 {
            sides.push(s);
        }
    }
    sides
}

fn signed_angle(d: f64) -> f64 {
    let w = d.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

fn circle_distance(a: f64, b: f64) -> f64 {
    signed_angle(a - b).abs()
}

fn partner_theta(system: &ProfileSystem, critical: usize, h_index: i64) -> Option<f64> {
    system.points.iter().find_map(|p| match p.kind {
        PointKind::Circle { h_index: h, theta } if p.critical == critical && h == h_index => {
            Some(theta)
        }
        _ => None,
    })
}

/// Source with a one-parameter unstable family (an index-2 pole, or a
/// circle maximum whose angular unstable set is the circle minus the
/// antipode). Rigid cascades exist only onto circle maxima, whose stable
/// set is a single angle: the count is the parity of transversal crossings
/// of that angle by the arrival curve.
fn family_count(
    system: &ProfileSystem,
    src: ModelPoint,
    tgt: ModelPoint,
    arc_center: Option<f64>,
) -> Result<u8, MbError> {
    let PointKind::Circle {
        h_index: 1,
        theta: theta_t,
    } = tgt.kind
    else {
        return Ok(0);
    };
    let mut parity = 0u8;
    for &s_start in &unstable_sides(system, src.critical) {
        let mut arrivals = Vec::with_capacity(ORACLE_DIRECTIONS);
        for d in 0..ORACLE_DIRECTIONS {
            // half-offset grid so symmetric target angles never sit on a sample
            let u = (d as f64 + 0.5) / ORACLE_DIRECTIONS as f64;
            let theta = match arc_center {
                Some(c) => c - PI + 2.0 * PI * u,
                None => 2.0 * PI * u,
            };
            arrivals.push((settle(system, s_start)?, theta));
        }
        let landing = arrivals[0].0;
        if arrivals.iter().any(|&(c, _)| c != landing) {
            return Err(MbError::AmbiguousClustering(ORACLE_DIRECTIONS));
        }
        if landing != tgt.critical {
            continue;
        }
        let diffs: Vec<f64> = arrivals
            .iter()
            .map(|&(_, theta)| signed_angle(theta - theta_t))
            .collect();
        // open arcs exclude the wrap pair; a full unstable circle includes it
        let pairs = if arc_center.is_some() {
            ORACLE_DIRECTIONS - 1
        } else {
            ORACLE_DIRECTIONS
        };
        let mut crossings = 0usize;
        for i in 0..pairs {
            let a = diffs[i];
            let b = diffs[(i + 1) % ORACLE_DIRECTIONS];
            if a.abs() < ORACLE_ANGLE_TOL || b.abs() < ORACLE_ANGLE_TOL {
                return Err(MbError::AmbiguousClustering(ORACLE_DIRECTIONS));
            }
            if a.signum() != b.signum() && a.abs() + b.abs() < PI / 2.0 {
                crossings += 1;
            }
        }
        parity ^= (crossings % 2) as u8;
    }
    Ok(parity)
}

/// Source with an isolated unstable set (a circle minimum): one trajectory
/// per descending side, each arriving at the source angle.
fn single_count(
    system: &ProfileSystem,
    src: ModelPoint,
    tgt: ModelPoint,
    theta_src: f64,
) -> Result<u8, MbError> {
    let mut parity = 0u8;
    for &s_start in &unstable_sides(system, src.critical) {
        if settle(system, s_start)? != tgt.critical {
            continue;
        }
        match tgt.kind {
            PointKind::Pole { .. } => parity ^= 1,
            PointKind::Circle {
                h_index: 1,
                theta: theta_t,
            } => {
                if circle_distance(theta_src, theta_t) < ORACLE_ANGLE_TOL {
                    parity ^= 1;
                }
            }
            PointKind::Circle { .. } => {
                let opposite =
                    partner_theta(system, tgt.critical, 1).expect("circle carries a maximum");
                if circle_distance(theta_src, opposite) < ORACLE_ANGLE_TOL {
                    return Err(MbError::AmbiguousClustering(ORACLE_DIRECTIONS));
                }
                parity ^= 1;
            }
        }
    }
    Ok(parity)
}

/// Mod-2 count of isolated gradient cascades between two critical points
/// of a built-in 2-D model, by shooting discretized unstable spheres and
/// clustering the arrivals. Pairs whose grading gap is not exactly 1
/// contribute nothing and return 0.
pub fn count_cascades_2d(
    model: CascadeModel2d,
    source: &str,
    target: &str,
) -> Result<u8, MbError> {
    let system = model.system();
    let find = |label: &str| {
        system
            .points
            .iter()
            .copied()
            .find(|p| p.label == label)
            .ok_or_else(|| MbError::UnknownModelPoint(label.to_string()))
    };
    let src = find(source)?;
    let tgt = find(target)?;
    if source == target || src.grading - tgt.grading != 1 {
        return Ok(0);
    }
    if src.critical == tgt.critical {
        // within one circle the two gradient arcs pair up, so counts are even
        return Ok(0);
    }
    match src.kind {
        PointKind::Pole { unstable: 0 } => Ok(0),
        PointKind::Pole { .. } => family_count(&system, src, tgt, None),
        PointKind::Circle {
            h_index: 1,
            theta: theta_src,
        } => family_count(&system, src, tgt, Some(theta_src)),
        PointKind::Circle {
            theta: theta_src, ..
        } => single_count(&system, src, tgt, theta_src),
    }
}

/// Datum of the teapot profile surface with every admissible cascade
/// parity produced by the shooting oracle rather than pinned by hand.
pub fn teapot_profile_datum() -> Result<MorseBottDatum, MbError> {
    let model = CascadeModel2d::TeapotProfile;
    let system = model.system();
    // heights z(s*) of the critical levels: ∫ slope over [0, s*]
    let heights = [0.0, 19.0 / 30.0, 4.0 / 15.0, 9.0 / 10.0];
    let comp_labels = ["base", "rim", "groove", "apex"];
    let offsets = [0, 1, 0, 2];
    let components = (0..4)
        .map(|i| Component {
            label: comp_labels[i].into(),
            f: heights[i],
            offset: offsets[i],
        })
        .collect();
    let points = system
        .points
        .iter()
        .map(|p| MorsePoint {
            comp: comp_labels[p.critical].into(),
            label: p.label.into(),
            h_index: match p.kind {
                PointKind::Pole { .. } => p.grading - offsets[p.critical],
                PointKind::Circle { h_index, .. } => h_index,
            },
        })
        .collect();
    let mut cascades = Vec::new();
    for src in &system.points {
        for tgt in &system.points {
            if src.grading - tgt.grading != 1 || heights[src.critical] < heights[tgt.critical] {
                continue;
            }
            if count_cascades_2d(model, src.label, tgt.label)? == 1 {
                cascades.push(Cascade {
                    from: src.label.into(),
                    to: tgt.label.into(),
                    parity: 1,
                });
            }
        }
    }
    Ok(MorseBottDatum {
        components,
        points,
        cascades,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims_of(c: &GradedComplexZ2) -> Vec<usize> {
        (c.lo()..=c.hi()).map(|k| c.dim(k)).collect()
    }

    fn homology_vec(c: &GradedComplexZ2) -> Vec<usize> {
        c.homology_dims().into_values().collect()
    }

    #[test]
    fn single_minimum_has_one_class() {
        let c = build_complex(&single_minimum_datum()).unwrap();
        assert_eq!(c.homology_dims(), BTreeMap::from([(0, 1)]));
    }

    #[test]
    fn teapot_complex_matches_pinned_matrices() {
        let c = build_complex(&teapot_datum()).unwrap();
        assert_eq!(dims_of(&c), vec![2, 2, 2]);
        assert_eq!(
            c.boundary(2),
            Gf2Matrix::from_rows(&[vec![1, 1], vec![0, 0]])
        );
        assert_eq!(
            c.boundary(1),
            Gf2Matrix::from_rows(&[vec![0, 1], vec![0, 1]])
        );
        assert_eq!(homology_vec(&c), vec![1, 0, 1]);
        assert_eq!(c.homology_dims_bruteforce().unwrap(), c.homology_dims());
        assert_eq!(c.euler_characteristic(), 2);
    }

    #[test]
    fn sphere_datum_homology_sits_at_ends() {
        let c = build_complex(&sphere_datum(2)).unwrap();
        assert_eq!(dims_of(&c), vec![1, 1, 1, 1]);
        assert_eq!(c.boundary(2), Gf2Matrix::ones(1, 1));
        assert_eq!(c.boundary(1), Gf2Matrix::zeros(1, 1));
        assert_eq!(c.boundary(3), Gf2Matrix::zeros(1, 1));
        assert_eq!(homology_vec(&c), vec![1, 0, 0, 1]);

        let c3 = build_complex(&sphere_datum(3)).unwrap();
        assert_eq!(homology_vec(&c3), vec![1, 0, 0, 0, 0, 1]);

        let circle = build_complex(&sphere_datum(1)).unwrap();
        assert_eq!(homology_vec(&circle), vec![1, 1]);
    }

    #[test]
    fn datum_validation_rejects_bad_cascades() {
        let mut bad = teapot_datum();
        bad.cascades.push(Cascade {
            from: "lid".into(),
            to: "base".into(),
            parity: 1,
        });
        assert!(matches!(
            build_complex(&bad),
            Err(MbError::BadGradingDrop { drop: 2, .. })
        ));

        let mut ascending = teapot_datum();
        ascending.components[2].f = 0.1; // handle now below the bowl
        assert!(matches!(
            build_complex(&ascending),
            Err(MbError::ValueAscends { .. })
        ));

        let mut unknown = teapot_datum();
        unknown.cascades[0].to = "nowhere".into();
        assert!(matches!(
            build_complex(&unknown),
            Err(MbError::UnknownPoint(_))
        ));

        let mut duplicate = teapot_datum();
        let repeat = duplicate.cascades[0].clone();
        duplicate.cascades.push(repeat);
        assert!(matches!(
            build_complex(&duplicate),
            Err(MbError::DuplicateCascade { .. })
        ));
    }

    #[test]
    fn inconsistent_counts_fail_the_complex_check() {
        let datum = MorseBottDatum {
            components: vec![
                Component { label: "a".into(), f: 2.0, offset: 2 },
                Component { label: "b".into(), f: 1.0, offset: 1 },
                Component { label: "c".into(), f: 0.0, offset: 0 },
            ],
            points: vec![
                MorsePoint { comp: "a".into(), label: "a".into(), h_index: 0 },
                MorsePoint { comp: "b".into(), label: "b".into(), h_index: 0 },
                MorsePoint { comp: "c".into(), label: "c".into(), h_index: 0 },
            ],
            cascades: vec![
                Cascade { from: "a".into(), to: "b".into(), parity: 1 },
                Cascade { from: "b".into(), to: "c".into(), parity: 1 },
            ],
        };
        assert!(matches!(
            build_complex(&datum),
            Err(MbError::Complex(ComplexError::NotAComplex(_)))
        ));
    }

    #[test]
    fn datum_json_roundtrip() {
        let datum = teapot_datum();
        let text = serde_json::to_string(&datum).unwrap();
        let back: MorseBottDatum = serde_json::from_str(&text).unwrap();
        let a = build_complex(&datum).unwrap();
        let b = build_complex(&back).unwrap();
        assert_eq!(a, b);

        let literal = r#"{
            "components": [
                {"label": "top", "f": 1.0, "offset": 1},
                {"label": "bot", "f": 0.0, "offset": 0}
            ],
            "points": [
                {"comp": "top", "label": "t", "h_index": 0},
                {"comp": "bot", "label": "b", "h_index": 0}
            ],
            "cascades": [{"from": "t", "to": "b", "parity": 1}]
        }"#;
        let parsed: MorseBottDatum = serde_json::from_str(literal).unwrap();
        let c = build_complex(&parsed).unwrap();
        assert_eq!(homology_vec(&c), vec![0, 0]);
    }

    #[test]
    fn sphere_spec_validation() {
        assert!(RfhSphereSpec::standard(2, 2).validate().is_ok());
        assert!(matches!(
            RfhSphereSpec::standard(1, 2).validate(),
            Err(MbError::BadDimension(1))
        ));
        assert!(matches!(
            RfhSphereSpec::standard(2, 0).validate(),
            Err(MbError::BadOrder(0))
        ));
        assert!(matches!(
            RfhSphereSpec { n: 2, m: 4, exponents: vec![1, 2] }.validate(),
            Err(MbError::ExponentNotCoprime(2, 4))
        ));
        assert!(matches!(
            RfhSphereSpec { n: 2, m: 2, exponents: vec![1] }.validate(),
            Err(MbError::ExponentCount { expected: 2, got: 1 })
        ));
        // negative exponents reduce mod m
        assert!(RfhSphereSpec { n: 2, m: 4, exponents: vec![-1, 3] }
            .validate()
            .is_ok());
    }

    #[test]
    fn pearl_complex_vanishes_with_odd_linking() {
        for spec in [RfhSphereSpec::standard(2, 1), RfhSphereSpec::standard(2, 2)] {
            let pearls = rfh_sphere_complex(&spec).unwrap();
            assert_eq!(pearls.period_shift(), 4);
            let dims = pearls.periodic_homology_dims(-8, 11).unwrap();
            assert!(dims.values().all(|&d| d == 0), "{dims:?}");
        }
    }

    #[test]
    fn pearl_complex_negative_control_is_nonzero() {
        let spec = RfhSphereSpec::standard(2, 2);
        let pearls = rfh_sphere_complex_even_linking(&spec).unwrap();
        let dims = pearls.periodic_homology_dims(-8, 11).unwrap();
        assert!(dims.values().any(|&d| d > 0), "{dims:?}");
        // the surviving classes are exactly the pearl extrema
        assert_eq!(dims[&0], 1);
        assert_eq!(dims[&3], 1);
        assert_eq!(dims[&1], 0);
    }

    #[test]
    fn ladder_matrix_identities() {
        for m in 1..=8 {
            let ones = ladder_all_ones(m);
            let cyclic = ladder_cyclic(m);
            assert_eq!(ones.rank(), 1);
            assert_eq!(cyclic.rank(), m - 1);
            let all_ones_vector = Gf2Matrix::ones(m, 1);
            assert!(cyclic.mul(&all_ones_vector).is_zero());
            assert!(cyclic.mul(&ones).is_zero());
            assert!(ones.mul(&cyclic).is_zero());
        }
    }

    #[test]
    fn rope_ladder_quotient_matches_displayed_complex() {
        for n in 2..=3 {
            for m in 1..=6 {
                let ladder = rope_ladder_complex(n, m).unwrap();
                let quotient = ladder.quotient_by_action(&cyclic_action(n, m)).unwrap();
                let displayed = lens_quotient_displayed(n, m).unwrap();
                let span = 2 * n as i64;
                for k in 1..span {
                    assert_eq!(
                        quotient.block().boundary(k),
                        displayed.block().boundary(k),
                        "n={n} m={m} k={k}"
                    );
                }
                assert_eq!(quotient.linking(), displayed.linking());
                assert_eq!(
                    quotient.periodic_homology_dims(-span, 2 * span - 1).unwrap(),
                    displayed.periodic_homology_dims(-span, 2 * span - 1).unwrap()
                );
            }
        }
    }

    #[test]
    fn lens_homology_split_by_parity() {
        for m in [2, 4, 6] {
            let dims = rfh_lens_homology(&RfhSphereSpec::standard(2, m)).unwrap();
            assert_eq!(dims.len(), 4);
            assert!(dims.values().all(|&d| d == 1), "m={m}: {dims:?}");
        }
        for m in [1, 3, 5] {
            let dims = rfh_lens_homology(&RfhSphereSpec::standard(2, m)).unwrap();
            assert_eq!(dims.len(), 4);
            assert!(dims.values().all(|&d| d == 0), "m={m}: {dims:?}");
        }
        let dims = rfh_lens_homology(&RfhSphereSpec::standard(3, 2)).unwrap();
        assert_eq!(dims.len(), 6);
        assert!(dims.values().all(|&d| d == 1));
    }

    #[test]
    fn fixed_point_betti_passthrough() {
        let circle = fixed_point_rfh(&FixedPointSpec { betti: vec![1, 1] });
        assert_eq!(circle.dims, BTreeMap::from([(0, 1), (1, 1)]));
        let point = fixed_point_rfh(&FixedPointSpec { betti: vec![1] });
        assert_eq!(point.dims, BTreeMap::from([(0, 1)]));
        let empty = fixed_point_rfh(&FixedPointSpec { betti: Vec::new() });
        assert!(empty.dims.is_empty());
        assert!(!empty.note.is_empty());
    }

    #[test]
    fn oracle_round_sphere_has_no_admissible_pairs() {
        let model = CascadeModel2d::RoundSphere;
        assert_eq!(count_cascades_2d(model, "max", "min").unwrap(), 0);
        assert_eq!(count_cascades_2d(model, "min", "max").unwrap(), 0);
        assert_eq!(count_cascades_2d(model, "max", "max").unwrap(), 0);
        assert!(matches!(
            count_cascades_2d(model, "max", "saddle"),
            Err(MbError::UnknownModelPoint(_))
        ));
    }

    #[test]
    fn oracle_teapot_profile_matches_pinned_matrices() {
        let model = CascadeModel2d::TeapotProfile;
        let expected = [
            ("rim_max", "groove_max", 1),
            ("rim_max", "rim_min", 0),
            ("apex", "groove_max", 1),
            ("apex", "rim_min", 0),
            ("groove_max", "base", 0),
            ("groove_max", "groove_min", 0),
            ("rim_min", "base", 1),
            ("rim_min", "groove_min", 1),
        ];
        for (src, tgt, parity) in expected {
            assert_eq!(
                count_cascades_2d(model, src, tgt).unwrap(),
                parity,
                "{src} -> {tgt}"
            );
        }
        assert_eq!(count_cascades_2d(model, "apex", "apex").unwrap(), 0);
    }

    #[test]
    fn oracle_datum_rebuilds_the_teapot_complex() {
        let datum = teapot_profile_datum().unwrap();
        let c = build_complex(&datum).unwrap();
        assert_eq!(dims_of(&c), vec![2, 2, 2]);
        let pinned = build_complex(&teapot_datum()).unwrap();
        assert_eq!(c.boundary(2), pinned.boundary(2));
        assert_eq!(c.boundary(1), pinned.boundary(1));
        assert_eq!(homology_vec(&c), vec![1, 0, 1]);
    }

    #[test]
    fn dims_tables_format() {
        let dims = BTreeMap::from([(-1, 2), (0, 1)]);
        assert_eq!(dims_to_json(&dims), r#"{"-1":2,"0":1}"#);
        assert_eq!(
            dims_to_markdown(&dims),
            "| degree | dim |\n|---|---|\n| -1 | 2 |\n| 0 | 1 |\n"
        );
    }
}
