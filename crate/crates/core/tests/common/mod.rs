//! Shared helpers and independent oracles for the integration tests.
#![allow(dead_code)]

use omnidensity::density::{Annotation, KernelPolicy, KernelSpec};
use rand::Rng;

/// Uniform direction on the sphere (`z` uniform, azimuth uniform).
pub fn random_direction(rng: &mut impl Rng) -> [f64; 3] {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}

/// Point annotations at uniform positions inside the pixel extent.
pub fn random_points(rng: &mut impl Rng, n: usize, w: usize, h: usize) -> Vec<Annotation> {
    (0..n)
        .map(|_| {
            Annotation::point(
                rng.random_range(-0.5..w as f64 - 0.5),
                rng.random_range(-0.5..h as f64 - 0.5),
            )
        })
        .collect()
}

/// Sigma per annotation, computed from the policy definitions directly.
pub fn oracle_sigmas(anns: &[Annotation], center: (f64, f64), spec: &KernelSpec) -> Vec<f64> {
    match spec.policy {
        KernelPolicy::Fixed { sigma } => vec![sigma; anns.len()],
        KernelPolicy::DistortionAdaptive(p) => anns
            .iter()
            .map(|a| {
                let d = ((a.center.0 - center.0).powi(2) + (a.center.1 - center.1).powi(2)).sqrt();
                if d == 0.0 {
                    p.sigma_max
                } else {
                    (p.sigma_alpha / (d / p.d_norm)).max(p.sigma_min).min(p.sigma_max)
                }
            })
            .collect(),
        KernelPolicy::GeometryAdaptive {
            k,
            beta,
            fallback_sigma,
        } => {
            if anns.len() < k + 1 {
                return vec![fallback_sigma; anns.len()];
            }
            anns.iter()
                .enumerate()
                .map(|(i, a)| {
                    let mut d: Vec<f64> = anns
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, b)| {
                            ((a.center.0 - b.center.0).powi(2) + (a.center.1 - b.center.1).powi(2))
                                .sqrt()
                        })
                        .collect();
                    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
                    beta * d[..k].iter().sum::<f64>() / k as f64
                })
                .collect()
        }
    }
}

/// Per-pixel evaluation of the sum of truncated, image-normalised Gaussians.
pub fn oracle_density(
    anns: &[Annotation],
    w: usize,
    h: usize,
    center: (f64, f64),
    spec: &KernelSpec,
) -> Vec<f64> {
    let sigmas = oracle_sigmas(anns, center, spec);
    let mut out = vec![0.0; w * h];
    for (a, &s) in anns.iter().zip(&sigmas) {
        let (cu, cv) = a.center;
        let r = spec.truncation * s;
        let mut k = vec![0.0; w * h];
        let mut total = 0.0;
        if s > 0.0 {
            for y in 0..h {
                for x in 0..w {
                    let d2 = (x as f64 - cu).powi(2) + (y as f64 - cv).powi(2);
                    if d2 <= r * r {
                        let v = (-d2 / (2.0 * s * s)).exp();
                        k[y * w + x] = v;
                        total += v;
                    }
                }
            }
        }
        if total > 0.0 {
            for (o, v) in out.iter_mut().zip(&k) {
                *o += v / total;
            }
        } else {
            let x = (cu.round().max(0.0) as usize).min(w - 1);
            let y = (cv.round().max(0.0) as usize).min(h - 1);
            out[y * w + x] += 1.0;
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Rotates a `w x h` row-major grid a quarter turn counterclockwise as
/// displayed, written out longhand.
pub fn rot90_grid(data: &[f64], w: usize, h: usize) -> Vec<f64> {
    // new grid is h wide, w tall; source (u, v) lands at (v, w - 1 - u)
    let mut out = vec![0.0; w * h];
    for v in 0..h {
        for u in 0..w {
            let (nu, nv) = (v, w - 1 - u);
            out[nv * h + nu] = data[v * w + u];
        }
    }
    out
}
