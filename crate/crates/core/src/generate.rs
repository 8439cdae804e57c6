//! Seeded instance generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TspnError};
use crate::instance::{Instance, Segment};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenKind {
    /// Independent uniform x, lower tip and length in a box.
    Uniform,
    /// Alternating bottom and top segments whose y-ranges are disjoint,
    /// interleaved along x so a tour has to bounce between the two combs.
    CombZigzag,
    /// Pairwise segment distance at least `1/epsilon`.
    FarApart,
    /// Everything inside a `width × height` box; height ≤ 3 exercises the
    /// bounded-height regime.
    PackedBox,
}

impl std::str::FromStr for GenKind {
    type Err = TspnError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(GenKind::Uniform),
            "comb_zigzag" | "comb-zigzag" => Ok(GenKind::CombZigzag),
            "far_apart" | "far-apart" => Ok(GenKind::FarApart),
            "packed_box" | "packed-box" => Ok(GenKind::PackedBox),
            o => Err(TspnError::Argument(format!("unknown generator `{o}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenParams {
    pub lambda: f64,
    pub width: f64,
    pub height: f64,
    pub epsilon: f64,
    /// Vertical gap between the two combs.
    pub gap: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            lambda: 1.0,
            width: 10.0,
            height: 10.0,
            epsilon: 0.5,
            gap: 0.5,
        }
    }
}

pub fn generate(kind: GenKind, n: usize, params: &GenParams, seed: u64) -> Result<Instance> {
    if n == 0 {
        return Err(TspnError::Argument("n must be at least 1".into()));
    }
    let p = params;
    if !(p.lambda >= 1.0 && p.lambda.is_finite()) {
        return Err(TspnError::Argument(format!("lambda = {} < 1", p.lambda)));
    }
    if !(p.width >= 0.0 && p.height >= 0.0 && p.gap >= 0.0) {
        return Err(TspnError::Argument("width, height and gap must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut len = |rng: &mut ChaCha8Rng| {
        if p.lambda > 1.0 {
            rng.gen_range(1.0..=p.lambda)
        } else {
            1.0
        }
    };
    let segs = match kind {
        GenKind::Uniform => (0..n)
            .map(|i| {
                let l = len(&mut rng);
                let x = rng.gen_range(0.0..=p.width);
                let y = rng.gen_range(0.0..=p.height);
                Segment::new(i, x, y, y + l)
            })
            .collect(),
        GenKind::PackedBox => {
            if p.height < p.lambda {
                return Err(TspnError::Argument(format!(
                    "packed_box height {} must be at least lambda {}",
                    p.height, p.lambda
                )));
            }
            (0..n)
                .map(|i| {
                    let l = len(&mut rng).min(p.height);
                    let x = rng.gen_range(0.0..=p.width);
                    let y = rng.gen_range(0.0..=(p.height - l));
                    Segment::new(i, x, y, y + l)
                })
                .collect()
        }
        GenKind::CombZigzag => {
            let step = if n > 1 { p.width / (n - 1) as f64 } else { 0.0 };
            (0..n)
                .map(|i| {
                    let l = len(&mut rng);
                    let jitter = rng.gen_range(-0.25..=0.25) * step;
                    let x = i as f64 * step + jitter;
                    let y = if i % 2 == 0 { -l } else { p.gap };
                    Segment::new(i, x, y, y + l)
                })
                .collect()
        }
        GenKind::FarApart => far_apart(n, p, &mut rng, &mut len)?,
    };
    Instance::new(segs, p.lambda)
}

fn far_apart(
    n: usize,
    p: &GenParams,
    rng: &mut ChaCha8Rng,
    len: &mut impl FnMut(&mut ChaCha8Rng) -> f64,
) -> Result<Vec<Segment>> {
    if !(p.epsilon > 0.0 && p.epsilon <= 1.0) {
        return Err(TspnError::Argument(format!("epsilon = {} not in (0, 1]", p.epsilon)));
    }
    let d = 1.0 / p.epsilon;
    let mut side = (d + p.lambda) * (n as f64).sqrt().ceil() * 2.0;
    let mut out: Vec<Segment> = Vec::with_capacity(n);
    let mut misses = 0;
    while out.len() < n {
        let l = len(rng);
        let x = rng.gen_range(0.0..=side);
        let y = rng.gen_range(0.0..=side);
        let s = Segment::new(out.len(), x, y, y + l);
        if out.iter().all(|o| o.dist_seg(&s) >= d) {
            out.push(s);
            misses = 0;
        } else {
            misses += 1;
            if misses > 200 {
                side *= 1.5;
                misses = 0;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn far_apart_distance() {
        let p = GenParams {
            epsilon: 0.5,
            ..Default::default()
        };
        for seed in 0..20 {
            let inst = generate(GenKind::FarApart, 5, &p, seed).unwrap();
            for (i, a) in inst.segments.iter().enumerate() {
                for b in &inst.segments[i + 1..] {
                    assert!(a.dist_seg(b) >= 2.0);
                }
            }
        }
    }

    #[test]
    fn comb_alternates() {
        let inst = generate(GenKind::CombZigzag, 6, &GenParams::default(), 1).unwrap();
        for (i, s) in inst.segments.iter().enumerate() {
            if i % 2 == 0 {
                assert!(s.y_top <= 0.0);
            } else {
                assert!(s.y_bot >= 0.5);
            }
        }
        let xs: Vec<f64> = inst.segments.iter().map(|s| s.x).collect();
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn deterministic() {
        for k in [GenKind::Uniform, GenKind::CombZigzag, GenKind::FarApart, GenKind::PackedBox] {
            let p = GenParams {
                height: 3.0,
                lambda: 1.5,
                ..Default::default()
            };
            assert_eq!(generate(k, 7, &p, 9).unwrap(), generate(k, 7, &p, 9).unwrap());
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(generate(GenKind::Uniform, 0, &GenParams::default(), 0).is_err());
        let p = GenParams {
            lambda: 0.5,
            ..Default::default()
        };
        assert!(generate(GenKind::Uniform, 3, &p, 0).is_err());
    }
}
