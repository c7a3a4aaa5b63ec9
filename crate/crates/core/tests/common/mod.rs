//! Brute-force reference minimisers for tiny penalised problems, written
//! without the library's loss or solver code.

#![allow(dead_code)]

use mest::{Dataset, LossSpec, PenaltyWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub enum RefLoss {
    Lad,
    Huber(f64),
}

impl RefLoss {
    pub fn value(self, r: f64) -> f64 {
        match self {
            RefLoss::Lad => r.abs(),
            RefLoss::Huber(c) if r.abs() <= c => r * r / 2.0,
            RefLoss::Huber(c) => c * r.abs() - c * c / 2.0,
        }
    }

    pub fn spec(self) -> LossSpec {
        match self {
            RefLoss::Lad => LossSpec::lad(),
            RefLoss::Huber(c) => LossSpec::huber(c).unwrap(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub rows: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub loss: RefLoss,
}

impl Instance {
    pub fn p(&self) -> usize {
        self.w.len()
    }

    pub fn dataset(&self) -> Dataset {
        Dataset::from_rows(&self.rows, &self.y).unwrap()
    }

    pub fn weights(&self) -> PenaltyWeights {
        PenaltyWeights::new(nalgebra::DVector::from_vec(self.w.clone())).unwrap()
    }

    pub fn objective(&self, beta: &[f64]) -> f64 {
        let n = self.y.len() as f64;
        let fit: f64 = self
            .rows
            .iter()
            .zip(&self.y)
            .map(|(x, y)| {
                let xb: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
                self.loss.value(y - xb)
            })
            .sum();
        fit / n + self.w.iter().zip(beta).map(|(w, b)| w * b.abs()).sum::<f64>()
    }
}

/// Random instance with `n <= 10`, `p <= 2`.
pub fn random_instance(rng: &mut ChaCha8Rng, loss: RefLoss) -> Instance {
    let n = rng.random_range(2..=10);
    let p = rng.random_range(1..=2);
    let rows = (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let w = (0..p)
        .map(|_| {
            if rng.random_bool(0.2) {
                0.0
            } else {
                rng.random_range(0.0..1.0)
            }
        })
        .collect();
    Instance { rows, y, w, loss }
}

pub fn instances(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let loss = if i % 2 == 0 {
                RefLoss::Lad
            } else {
                RefLoss::Huber(rng.random_range(0.2..2.0))
            };
            random_instance(&mut rng, loss)
        })
        .collect()
}

/// Best value on a coarse grid over `[-radius, radius]^p`, refined around the
/// incumbent until the spacing is negligible.
pub fn grid_minimum(inst: &Instance, radius: f64) -> (f64, Vec<f64>) {
    let p = inst.p();
    let mut center = vec![0.0; p];
    let mut half = radius;
    let mut best = (inst.objective(&center), center.clone());
    let points = 81usize;
    while half > 1e-9 {
        let step = 2.0 * half / (points - 1) as f64;
        let axis = |c: f64, k: usize| c - half + step * k as f64;
        if p == 1 {
            for a in 0..points {
                let b = vec![axis(center[0], a)];
                let v = inst.objective(&b);
                if v < best.0 {
                    best = (v, b);
                }
            }
        } else {
            for a in 0..points {
                for c in 0..points {
                    let b = vec![axis(center[0], a), axis(center[1], c)];
                    let v = inst.objective(&b);
                    if v < best.0 {
                        best = (v, b);
                    }
                }
            }
        }
        center = best.1.clone();
        half = 4.0 * step;
    }
    best
}

/// Every point where `p` of the LAD objective's kink hyperplanes meet.
pub fn lad_vertices(inst: &Instance) -> Vec<Vec<f64>> {
    let p = inst.p();
    // hyperplanes a'b = c
    let mut planes: Vec<(Vec<f64>, f64)> = inst.rows.iter().cloned().zip(inst.y.iter().copied()).collect();
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        planes.push((e, 0.0));
    }
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(p);
    choose(planes.len(), p, 0, &mut pick, &mut |idx| {
        let a = nalgebra::DMatrix::from_fn(p, p, |r, c| planes[idx[r]].0[c]);
        let c = nalgebra::DVector::from_fn(p, |r, _| planes[idx[r]].1);
        if a.determinant().abs() > 1e-9 {
            if let Some(v) = a.lu().solve(&c) {
                out.push(v.iter().copied().collect());
            }
        }
    });
    out
}

fn choose(total: usize, k: usize, from: usize, pick: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if pick.len() == k {
        visit(pick);
        return;
    }
    for i in from..total {
        pick.push(i);
        choose(total, k, i + 1, pick, visit);
        pick.pop();
    }
}

/// Smallest LAD objective over all vertices, which is the exact optimum.
pub fn lad_vertex_minimum(inst: &Instance) -> f64 {
    lad_vertices(inst)
        .iter()
        .map(|v| inst.objective(v))
        .fold(inst.objective(&vec![0.0; inst.p()]), f64::min)
}

/// Reference optimum: grid search, plus vertex enumeration for LAD.
pub fn reference_minimum(inst: &Instance) -> f64 {
    let mut best = grid_minimum(inst, 50.0).0;
    if matches!(inst.loss, RefLoss::Lad) {
        for v in lad_vertices(inst) {
            best = best.min(inst.objective(&v));
        }
    }
    best
}
