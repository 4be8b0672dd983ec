//! Morphometric observables: ring quotient, thresholded tumor region, area,
//! maximal radius and surface quotient, plus lumped density integrals.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::mesh::{compensated_sum, weighted_sum, StructuredTriMesh};
use crate::solver::SimulationState;

/// Density level above which a vertex counts as tumor.
pub const DEFAULT_THRESHOLD: f64 = 0.001;

/// Below this total tumor mass the ring quotient is reported as 1.
const EMPTY_TUMOR_MASS: f64 = 1e-14;

const CIRCLE_SEED: u64 = 0x5EC0_C1C1E;

/// One time point of the observables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsSample {
    pub time: f64,
    pub rq: f64,
    /// NaN when the thresholded region is empty.
    pub sq: f64,
    pub area: f64,
    pub r_max: f64,
    pub tumor_density: f64,
    pub total_tn_density: f64,
    pub phi_density: f64,
}

/// Vertices where `T + N >= theta`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThresholdedRegion {
    pub vertices: Vec<usize>,
    pub points: Vec<[f64; 2]>,
}

impl ThresholdedRegion {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensitySelector {
    Tumor,
    Necrosis,
    TumorPlusNecrosis,
    Vasculature,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Circle {
    const RELATIVE_SLACK: f64 = 1e-12;

    pub fn contains(&self, p: [f64; 2]) -> bool {
        dist(self.center, p) <= self.radius * (1.0 + Self::RELATIVE_SLACK) + 1e-14
    }

    fn diameter(a: [f64; 2], b: [f64; 2]) -> Self {
        let center = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        Circle {
            center,
            radius: dist(center, a).max(dist(center, b)),
        }
    }

    /// Circle through three points; `None` when they are collinear.
    pub fn circumscribe(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Option<Self> {
        // translate to the bounding-box center for conditioning
        let ox = (a[0].min(b[0]).min(c[0]) + a[0].max(b[0]).max(c[0])) / 2.0;
        let oy = (a[1].min(b[1]).min(c[1]) + a[1].max(b[1]).max(c[1])) / 2.0;
        let (ax, ay) = (a[0] - ox, a[1] - oy);
        let (bx, by) = (b[0] - ox, b[1] - oy);
        let (cx, cy) = (c[0] - ox, c[1] - oy);
        let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
        if d == 0.0 {
            return None;
        }
        let (a2, b2, c2) = (ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy);
        let x = ox + (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
        let y = oy + (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
        let center = [x, y];
        let radius = dist(center, a).max(dist(center, b)).max(dist(center, c));
        Some(Circle { center, radius })
    }
}

#[inline]
fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[inline]
fn cross(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Smallest enclosing circle, randomized incremental construction.
/// The shuffle uses a fixed seed, so the result is deterministic.
pub fn smallest_enclosing_circle(points: &[[f64; 2]]) -> Option<Circle> {
    let mut pts = points.to_vec();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(CIRCLE_SEED));
    let mut circle: Option<Circle> = None;
    for i in 0..pts.len() {
        if circle.is_none_or(|c| !c.contains(pts[i])) {
            circle = Some(circle_with_one(&pts[..i], pts[i]));
        }
    }
    circle
}

fn circle_with_one(points: &[[f64; 2]], p: [f64; 2]) -> Circle {
    let mut c = Circle {
        center: p,
        radius: 0.0,
    };
    for (i, &q) in points.iter().enumerate() {
        if !c.contains(q) {
            c = if c.radius == 0.0 {
                Circle::diameter(p, q)
            } else {
                circle_with_two(&points[..i], p, q)
            };
        }
    }
    c
}

fn circle_with_two(points: &[[f64; 2]], p: [f64; 2], q: [f64; 2]) -> Circle {
    let base = Circle::diameter(p, q);
    let mut left: Option<Circle> = None;
    let mut right: Option<Circle> = None;
    for &r in points {
        if base.contains(r) {
            continue;
        }
        let side = cross(p, q, r);
        let Some(c) = Circle::circumscribe(p, q, r) else {
            continue;
        };
        let offset = cross(p, q, c.center);
        if side > 0.0 && left.is_none_or(|l| offset > cross(p, q, l.center)) {
            left = Some(c);
        } else if side < 0.0 && right.is_none_or(|rc| offset < cross(p, q, rc.center)) {
            right = Some(c);
        }
    }
    match (left, right) {
        (None, None) => base,
        (Some(c), None) | (None, Some(c)) => c,
        (Some(l), Some(r)) => {
            if l.radius <= r.radius {
                l
            } else {
                r
            }
        }
    }
}

/// `∫T / ∫(T+N)`; 1 when there is no tumor mass at all.
pub fn ring_quotient(state: &SimulationState, mesh: &StructuredTriMesh) -> Result<f64> {
    let tumor = total_density(state, mesh, DensitySelector::Tumor)?;
    let total = total_density(state, mesh, DensitySelector::TumorPlusNecrosis)?;
    if total.abs() < EMPTY_TUMOR_MASS {
        Ok(1.0)
    } else {
        Ok(tumor / total)
    }
}

pub fn threshold_indicator(
    state: &SimulationState,
    mesh: &StructuredTriMesh,
    theta: f64,
) -> Result<ThresholdedRegion> {
    check_len(mesh.n_vertices(), state.len())?;
    let vertices: Vec<usize> = (0..state.len())
        .filter(|&v| state.t_field[v] + state.n_field[v] >= theta)
        .collect();
    let points = vertices.iter().map(|&v| mesh.vertices()[v]).collect();
    Ok(ThresholdedRegion { vertices, points })
}

/// Lumped area of the region.
pub fn tumor_area(region: &ThresholdedRegion, mesh: &StructuredTriMesh) -> f64 {
    let w = mesh.lumped_weights();
    compensated_sum(region.vertices.iter().map(|&v| w[v]))
}

/// Radius of the smallest circle containing every region vertex.
pub fn max_radius(region: &ThresholdedRegion) -> Result<f64> {
    smallest_enclosing_circle(&region.points)
        .map(|c| c.radius)
        .ok_or(Error::EmptyRegion)
}

/// Region area over the area of its smallest enclosing circle.
///
/// Blobs narrower than half a cell are reported as perfectly regular (1).
/// On coarse meshes the lumped area can exceed the circle area, so values
/// slightly above 1 are legitimate.
pub fn surface_quotient(
    state: &SimulationState,
    mesh: &StructuredTriMesh,
    theta: f64,
) -> Result<f64> {
    let region = threshold_indicator(state, mesh, theta)?;
    surface_quotient_of(&region, mesh)
}

fn surface_quotient_of(region: &ThresholdedRegion, mesh: &StructuredTriMesh) -> Result<f64> {
    let r = max_radius(region)?;
    if r < mesh.cell_edge() / 2.0 {
        return Ok(1.0);
    }
    Ok(tumor_area(region, mesh) / (std::f64::consts::PI * r * r))
}

pub fn total_density(
    state: &SimulationState,
    mesh: &StructuredTriMesh,
    selector: DensitySelector,
) -> Result<f64> {
    check_len(mesh.n_vertices(), state.len())?;
    let w = mesh.lumped_weights();
    Ok(match selector {
        DensitySelector::Tumor => weighted_sum(w, &state.t_field),
        DensitySelector::Necrosis => weighted_sum(w, &state.n_field),
        DensitySelector::Vasculature => weighted_sum(w, &state.phi_field),
        DensitySelector::TumorPlusNecrosis => compensated_sum(
            w.iter()
                .zip(state.t_field.iter().zip(&state.n_field))
                .map(|(w, (t, n))| w * (t + n)),
        ),
    })
}

/// Evaluate every observable on one state.
pub fn sample(
    state: &SimulationState,
    mesh: &StructuredTriMesh,
    theta: f64,
) -> Result<MetricsSample> {
    let region = threshold_indicator(state, mesh, theta)?;
    let area = tumor_area(&region, mesh);
    let (r_max, sq) = if region.is_empty() {
        (0.0, f64::NAN)
    } else {
        (max_radius(&region)?, surface_quotient_of(&region, mesh)?)
    };
    Ok(MetricsSample {
        time: state.time,
        rq: ring_quotient(state, mesh)?,
        sq,
        area,
        r_max,
        tumor_density: total_density(state, mesh, DensitySelector::Tumor)?,
        total_tn_density: total_density(state, mesh, DensitySelector::TumorPlusNecrosis)?,
        phi_density: total_density(state, mesh, DensitySelector::Vasculature)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Bounds};
    use crate::model::FieldTriple;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn default_mesh() -> StructuredTriMesh {
        build_mesh(Bounds::centered_square(9.0), 45).unwrap()
    }

    fn with_fields(
        mesh: &StructuredTriMesh,
        t: impl Fn(usize) -> f64,
        n: impl Fn(usize) -> f64,
    ) -> SimulationState {
        let len = mesh.n_vertices();
        SimulationState::new(
            0.0,
            (0..len).map(&t).collect(),
            (0..len).map(&n).collect(),
            vec![0.0; len],
        )
        .unwrap()
    }

    #[test]
    fn ring_quotient_examples() {
        let m = default_mesh();
        let s = with_fields(&m, |v| if v % 4 == 0 { 0.3 } else { 0.0 }, |_| 0.0);
        assert_eq!(ring_quotient(&s, &m).unwrap(), 1.0);
        let s = with_fields(&m, |_| 0.0, |v| if v == 17 { 0.2 } else { 0.0 });
        assert_eq!(ring_quotient(&s, &m).unwrap(), 0.0);
        let s = SimulationState::uniform(m.n_vertices(), FieldTriple::new(0.2, 0.3, 0.1));
        assert_abs_diff_eq!(ring_quotient(&s, &m).unwrap(), 0.4, epsilon = 1e-14);
        let empty = SimulationState::uniform(m.n_vertices(), FieldTriple::default());
        assert_eq!(ring_quotient(&empty, &m).unwrap(), 1.0);
    }

    #[test]
    fn threshold_examples() {
        let m = default_mesh();
        let none = SimulationState::uniform(m.n_vertices(), FieldTriple::default());
        assert!(threshold_indicator(&none, &m, DEFAULT_THRESHOLD)
            .unwrap()
            .is_empty());
        let all = SimulationState::uniform(m.n_vertices(), FieldTriple::new(0.25, 0.25, 0.0));
        assert_eq!(
            threshold_indicator(&all, &m, DEFAULT_THRESHOLD)
                .unwrap()
                .len(),
            m.n_vertices()
        );
        let edge = with_fields(&m, |v| if v == 100 { 0.001 } else { 0.0 }, |_| 0.0);
        let region = threshold_indicator(&edge, &m, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(region.vertices, vec![100]);
    }

    #[test]
    fn area_examples() {
        let m = default_mesh();
        assert_eq!(tumor_area(&ThresholdedRegion::default(), &m), 0.0);
        let all = ThresholdedRegion {
            vertices: (0..m.n_vertices()).collect(),
            points: m.vertices().to_vec(),
        };
        assert_abs_diff_eq!(tumor_area(&all, &m), 324.0, epsilon = 1e-12);
        let v = m.vertex_index(22, 22);
        let one = ThresholdedRegion {
            vertices: vec![v],
            points: vec![m.vertices()[v]],
        };
        assert_abs_diff_eq!(tumor_area(&one, &m), 0.16, epsilon = 1e-14);
    }

    #[test]
    fn radius_examples() {
        let r = |pts: Vec<[f64; 2]>| {
            max_radius(&ThresholdedRegion {
                vertices: (0..pts.len()).collect(),
                points: pts,
            })
        };
        assert_eq!(r(vec![[0.0, 0.0]]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            r(vec![[0.0, 0.0], [1.0, 0.0]]).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let tri = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]];
        assert_abs_diff_eq!(r(tri).unwrap(), 0.5773502691896258, epsilon = 1e-14);
        assert!(matches!(r(vec![]), Err(Error::EmptyRegion)));
    }

    #[test]
    fn sq_of_two_distant_blobs() {
        let m = default_mesh();
        let a = m.vertex_index(12, 22); // (-4.2, -0.2)
        let b = m.vertex_index(32, 22); // (3.8, -0.2)
        let s = with_fields(&m, |v| if v == a || v == b { 0.5 } else { 0.0 }, |_| 0.0);
        let sq = surface_quotient(&s, &m, DEFAULT_THRESHOLD).unwrap();
        // area 2 * 0.16, radius 4
        assert_abs_diff_eq!(sq, 0.32 / (16.0 * std::f64::consts::PI), epsilon = 1e-12);
        assert_abs_diff_eq!(sq, 0.006366, epsilon = 1e-6);
    }

    #[test]
    fn sq_degenerate_cases() {
        let m = default_mesh();
        let single = with_fields(&m, |v| if v == 999 { 0.5 } else { 0.0 }, |_| 0.0);
        assert_eq!(
            surface_quotient(&single, &m, DEFAULT_THRESHOLD).unwrap(),
            1.0
        );
        let none = SimulationState::uniform(m.n_vertices(), FieldTriple::default());
        assert!(matches!(
            surface_quotient(&none, &m, DEFAULT_THRESHOLD),
            Err(Error::EmptyRegion)
        ));
        let sample = sample(&none, &m, DEFAULT_THRESHOLD).unwrap();
        assert!(sample.sq.is_nan());
        assert_eq!(sample.area, 0.0);
    }

    #[test]
    fn disc_sq_converges_under_refinement() {
        let mut previous_gap = f64::INFINITY;
        for n in [45, 90, 180] {
            let m = build_mesh(Bounds::centered_square(9.0), n).unwrap();
            let s = with_fields(
                &m,
                |v| {
                    let p = m.vertices()[v];
                    if p[0].hypot(p[1]) <= 4.0 {
                        1.0
                    } else {
                        0.0
                    }
                },
                |_| 0.0,
            );
            let sq = surface_quotient(&s, &m, DEFAULT_THRESHOLD).unwrap();
            let gap = (sq - 1.0).abs();
            assert!(gap < previous_gap || gap < 0.01, "n={n}: sq={sq}");
            previous_gap = gap;
            if n == 180 {
                assert!((0.9..=1.05).contains(&sq), "sq={sq}");
            }
        }
    }

    #[test]
    fn density_selectors() {
        let m = default_mesh();
        let zero = SimulationState::uniform(m.n_vertices(), FieldTriple::default());
        assert_eq!(
            total_density(&zero, &m, DensitySelector::TumorPlusNecrosis).unwrap(),
            0.0
        );
        let one = SimulationState::uniform(m.n_vertices(), FieldTriple::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(
            total_density(&one, &m, DensitySelector::Tumor).unwrap(),
            324.0,
            epsilon = 1e-12
        );
        let s = with_fields(&m, |v| (v % 11) as f64 / 11.0, |v| (v % 5) as f64 / 9.0);
        let t = total_density(&s, &m, DensitySelector::Tumor).unwrap();
        let n = total_density(&s, &m, DensitySelector::Necrosis).unwrap();
        let tn = total_density(&s, &m, DensitySelector::TumorPlusNecrosis).unwrap();
        assert_abs_diff_eq!(tn, t + n, epsilon = 1e-11);
    }

    #[test]
    fn circle_is_independent_of_input_order() {
        let pts: Vec<[f64; 2]> = (0..40)
            .map(|i| {
                let a = i as f64 * 0.7;
                [a.cos() * (1.0 + 0.1 * (i % 3) as f64), a.sin()]
            })
            .collect();
        let mut rev = pts.clone();
        rev.reverse();
        let a = smallest_enclosing_circle(&pts).unwrap();
        let b = smallest_enclosing_circle(&rev).unwrap();
        assert_abs_diff_eq!(a.radius, b.radius, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn ring_quotient_is_bounded_and_scale_invariant(
            seed in 0u64..1000, scale in 0.01..100.0f64,
        ) {
            let m = build_mesh(Bounds::centered_square(2.0), 6).unwrap();
            let f = |v: usize, k: u64| (((v as u64 + 1) * (seed + k) * 2654435761) % 1000) as f64 / 1000.0;
            let s = with_fields(&m, |v| f(v, 1), |v| f(v, 7));
            let scaled = with_fields(&m, |v| scale * f(v, 1), |v| scale * f(v, 7));
            let rq = ring_quotient(&s, &m).unwrap();
            prop_assert!((0.0..=1.0).contains(&rq));
            prop_assert!((rq - ring_quotient(&scaled, &m).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn area_is_monotone_in_threshold(seed in 0u64..500, lo in 0.0..0.5f64, gap in 0.0..0.5f64) {
            let m = build_mesh(Bounds::centered_square(3.0), 8).unwrap();
            let f = |v: usize| (((v as u64 + 3) * (seed + 11) * 40503) % 997) as f64 / 997.0;
            let s = with_fields(&m, f, |v| 0.5 * f(v + 1));
            let low = tumor_area(&threshold_indicator(&s, &m, lo).unwrap(), &m);
            let high = tumor_area(&threshold_indicator(&s, &m, lo + gap).unwrap(), &m);
            prop_assert!(low >= high);
        }
    }
}
