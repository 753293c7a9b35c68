//! Independent scalar-loop oracles for the recurrent kernels, shared by the
//! oracle tests and the acceptance suite.
#![allow(dead_code)]

use iin_core::nn::{
    encode_context, lstm_step, phased_step, phased_step_with_gate, CellKind, ContextBatch, HeadMode, LstmCellParams,
    ModelParams, ModelShape, TimeGateParams,
};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn random_cell(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> LstmCellParams {
    let mut p = LstmCellParams::zeros(input, hidden);
    for v in p
        .w_x
        .iter_mut()
        .chain(p.w_h.iter_mut())
        .chain(p.peephole.iter_mut())
        .chain(p.bias.iter_mut())
    {
        *v = rng.random_range(-1.0..1.0);
    }
    p
}

pub fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()
}

/// Element-by-element evaluation of the peephole cell.
pub fn oracle_step(p: &LstmCellParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let pre = |gate: usize, j: usize| {
        let col = gate * n + j;
        let mut a = p.bias[col];
        for (k, xk) in x.iter().enumerate() {
            a += xk * p.w_x[(k, col)];
        }
        for (m, hm) in h.iter().enumerate() {
            a += hm * p.w_h[(m, col)];
        }
        a
    };
    let mut h_out = vec![0.0; n];
    let mut c_out = vec![0.0; n];
    for j in 0..n {
        let i = sig(pre(0, j) + p.peephole[(0, j)] * c[j]);
        let f = sig(pre(1, j) + p.peephole[(1, j)] * c[j]);
        let cj = f * c[j] + i * pre(2, j).tanh();
        let o = sig(pre(3, j) + p.peephole[(2, j)] * cj);
        c_out[j] = cj;
        h_out[j] = o * cj.tanh();
    }
    (h_out, c_out)
}

pub fn oracle_gate(t: f64, tau: f64, r_on: f64, s: f64, alpha: f64) -> f64 {
    let mut phi = (t - s) % tau;
    if phi < 0.0 {
        phi += tau;
    }
    phi /= tau;
    if phi < r_on / 2.0 {
        2.0 * phi / r_on
    } else if phi < r_on {
        2.0 - 2.0 * phi / r_on
    } else {
        alpha * phi
    }
}

pub fn oracle_phased(
    p: &LstmCellParams,
    g: &TimeGateParams,
    x: &[f64],
    t: f64,
    alpha: f64,
    h: &[f64],
    c: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let (ht, ct) = oracle_step(p, x, h, c);
    let mut h_out = vec![0.0; h.len()];
    let mut c_out = vec![0.0; h.len()];
    for j in 0..h.len() {
        let k = oracle_gate(t, g.tau[j], g.r_on[j], g.shift[j], alpha);
        c_out[j] = k * ct[j] + (1.0 - k) * c[j];
        h_out[j] = k * ht[j] + (1.0 - k) * h[j];
    }
    (h_out, c_out)
}

pub fn oracle_stack(
    cells: &[LstmCellParams],
    gates: Option<&[TimeGateParams]>,
    seq: &[f64],
    times: &[f64],
) -> Vec<f64> {
    let hidden = cells[0].hidden();
    let mut inputs: Vec<Vec<f64>> = seq.iter().map(|v| vec![*v]).collect();
    for (l, cell) in cells.iter().enumerate() {
        let mut h = vec![0.0; hidden];
        let mut c = vec![0.0; hidden];
        let mut outs = Vec::new();
        for (j, x) in inputs.iter().enumerate() {
            (h, c) = match gates {
                None => oracle_step(cell, x, &h, &c),
                Some(g) => oracle_phased(cell, &g[l], x, times[j], 0.0, &h, &c),
            };
            outs.push(h.clone());
        }
        inputs = outs;
    }
    inputs.pop().unwrap()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn random_model(shape: ModelShape, rng: &mut ChaCha8Rng) -> ModelParams {
    let mut m = ModelParams::zeros(shape);
    for (_, data) in m.weights.tensors_mut() {
        for v in data.iter_mut() {
            *v = rng.random_range(-0.8..0.8);
        }
    }
    if shape.cell == CellKind::Phased {
        let gates = m.time_gates.as_mut().unwrap();
        for g in gates.forward.iter_mut().chain(gates.backward.iter_mut()) {
            let mut fresh = TimeGateParams::sample(shape.hidden, 6.0, rng);
            fresh.r_on = (0..shape.hidden).map(|_| rng.random_range(0.3..1.0)).collect();
            *g = fresh;
        }
    }
    m
}

pub fn batch(rng: &mut ChaCha8Rng, n: usize, w: usize, phased: bool) -> ContextBatch {
    let fill = |rng: &mut ChaCha8Rng| Array2::from_shape_simple_fn((n, w), || rng.random_range(-1.5..1.5));
    let forward = fill(rng);
    let backward = fill(rng);
    let times = |offset: f64| Array2::from_shape_fn((n, w), |(b, j)| b as f64 * 0.37 + offset + j as f64);
    ContextBatch {
        forward,
        backward,
        forward_times: phased.then(|| times(0.0)),
        backward_times: phased.then(|| times(0.5)),
    }
}

pub fn loss(m: &ModelParams, b: &ContextBatch, y: &Array1<f64>, mode: &HeadMode<'_>) -> f64 {
    m.predict(b, mode).iter().zip(y).map(|(p, t)| (p - t).abs()).sum::<f64>() / y.len() as f64
}

/// Largest |kernel - oracle| over 100 random peephole-cell steps.
pub fn lstm_step_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let hidden = 1 + case % 8;
        let input = 1 + case % 3;
        let p = random_cell(input, hidden, &mut rng);
        let (x, h, c) = (random_vec(input, &mut rng), random_vec(hidden, &mut rng), random_vec(hidden, &mut rng));
        let (h1, c1) = lstm_step(&p, Array1::from(x.clone()).view(), Array1::from(h.clone()).view(), Array1::from(c.clone()).view());
        let (h2, c2) = oracle_step(&p, &x, &h, &c);
        worst = worst.max(max_diff(h1.as_slice().unwrap(), &h2)).max(max_diff(c1.as_slice().unwrap(), &c2));
    }
    worst
}

pub fn phased_step_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let hidden = 1 + case % 8;
        let p = random_cell(1, hidden, &mut rng);
        let mut g = TimeGateParams::sample(hidden, 20.0, &mut rng);
        g.r_on = (0..hidden).map(|_| rng.random_range(0.05..1.0)).collect();
        let t = rng.random_range(-30.0..30.0);
        let alpha = if case % 2 == 0 { 0.0 } else { 0.001 };
        let (x, h, c) = (random_vec(1, &mut rng), random_vec(hidden, &mut rng), random_vec(hidden, &mut rng));
        let (h1, c1) = phased_step(
            &p,
            &g,
            Array1::from(x.clone()).view(),
            t,
            alpha,
            Array1::from(h.clone()).view(),
            Array1::from(c.clone()).view(),
        );
        let (h2, c2) = oracle_phased(&p, &g, &x, t, alpha, &h, &c);
        worst = worst.max(max_diff(h1.as_slice().unwrap(), &h2)).max(max_diff(c1.as_slice().unwrap(), &c2));
    }
    worst
}

/// Both encoder stacks against per-layer oracle loops, a third of the cases phased.
pub fn encode_context_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let hidden = 1 + case % 8;
        let w = 1 + case % 4;
        let cell = if case % 3 == 0 { CellKind::Phased } else { CellKind::Standard };
        let m = random_model(ModelShape { cell, ..ModelShape::standard(hidden) }, &mut rng);
        let left = random_vec(w, &mut rng);
        let right = random_vec(w, &mut rng);
        let lt: Vec<f64> = (0..w).map(|j| j as f64).collect();
        let rt: Vec<f64> = (0..w).map(|j| (w + 1 + j) as f64).collect();
        let times = (cell == CellKind::Phased).then_some((lt.as_slice(), rt.as_slice()));
        let (hf, hb) = encode_context(&m, &left, &right, times);

        let gates = m.time_gates.as_ref();
        let of = oracle_stack(&m.weights.forward, gates.map(|g| g.forward.as_slice()), &left, &lt);
        let rev: Vec<f64> = right.iter().rev().copied().collect();
        let rev_t: Vec<f64> = rt.iter().rev().copied().collect();
        let ob = oracle_stack(&m.weights.backward, gates.map(|g| g.backward.as_slice()), &rev, &rev_t);
        worst = worst.max(max_diff(hf.as_slice().unwrap(), &of)).max(max_diff(hb.as_slice().unwrap(), &ob));
    }
    worst
}

/// (largest |open gate - standard cell|, whether a closed gate kept every
/// state bit) over 50 random steps.
pub fn gate_reductions(seed: u64) -> (f64, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut held = true;
    for _ in 0..50 {
        let p = random_cell(1, 6, &mut rng);
        let (x, h, c) = (random_vec(1, &mut rng), random_vec(6, &mut rng), random_vec(6, &mut rng));
        let (x, h, c) = (Array1::from(x), Array1::from(h), Array1::from(c));
        let (hs, cs) = lstm_step(&p, x.view(), h.view(), c.view());
        let (hp, cp) = phased_step_with_gate(&p, x.view(), Array1::ones(6).view(), h.view(), c.view());
        worst = worst
            .max(max_diff(hs.as_slice().unwrap(), hp.as_slice().unwrap()))
            .max(max_diff(cs.as_slice().unwrap(), cp.as_slice().unwrap()));
        let (hz, cz) = phased_step_with_gate(&p, x.view(), Array1::zeros(6).view(), h.view(), c.view());
        held &= hz.iter().zip(&h).all(|(a, b)| a.to_bits() == b.to_bits());
        held &= cz.iter().zip(&c).all(|(a, b)| a.to_bits() == b.to_bits());
    }
    (worst, held)
}

#[derive(Debug)]
pub struct GradientCheck {
    pub points: usize,
    pub entries: usize,
    pub worst_relative: f64,
    pub worst_entry: String,
}

/// Central differences against the analytic gradient of every parameter
/// entry, at 10 random points whose residuals all clear the MAE kink.
/// Hidden 4, w = 3, batch 8, dropout 0.3 in training mode.
pub fn gradient_check(cell: CellKind, seed: u64) -> GradientCheck {
    let eps = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = ModelShape { cell, ..ModelShape::standard(4) };
    let mut out = GradientCheck {
        points: 0,
        entries: 0,
        worst_relative: 0.0,
        worst_entry: String::new(),
    };
    while out.points < 10 {
        let m = random_model(shape, &mut rng);
        let b = batch(&mut rng, 8, 3, cell == CellKind::Phased);
        let y = Array1::from(random_vec(8, &mut rng));
        let keep = Array2::from_shape_simple_fn((8, 8), || if rng.random::<f64>() < 0.3 { 0.0 } else { 1.0 });
        let mode = HeadMode::Train { keep: &keep, rate: 0.3 };
        let pred = m.predict(&b, &mode);
        if pred.iter().zip(&y).any(|(p, t)| (p - t).abs() <= 1e-3) {
            continue;
        }
        out.points += 1;
        let (_, grads) = m.loss_and_gradients(&b, y.view(), &mode);
        let analytic: Vec<(String, Vec<f64>)> = grads.tensors().into_iter().map(|(k, _, d)| (k, d.to_vec())).collect();
        let mut probe = m.clone();
        for (ti, (name, g)) in analytic.iter().enumerate() {
            for (ei, &a) in g.iter().enumerate() {
                let orig = probe.weights.tensors_mut()[ti].1[ei];
                probe.weights.tensors_mut()[ti].1[ei] = orig + eps;
                let up = loss(&probe, &b, &y, &mode);
                probe.weights.tensors_mut()[ti].1[ei] = orig - eps;
                let down = loss(&probe, &b, &y, &mode);
                probe.weights.tensors_mut()[ti].1[ei] = orig;
                let numeric = (up - down) / (2.0 * eps);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                out.entries += 1;
                if rel > out.worst_relative {
                    out.worst_relative = rel;
                    out.worst_entry = format!("{name}[{ei}] analytic {a} numeric {numeric}");
                }
            }
        }
    }
    out
}
