//! Gradients of the directional triplet loss taken through the encoder,
//! checked against central finite differences of the full chain.

use aespace::encoder::{EncoderParams, Gradients};
use aespace::loss::{directional_triplet_loss, norm, LossConfig};
use aespace::Score;
use rand::Rng;

fn chain_loss(
    p: &EncoderParams,
    xs: &[Vec<f64>; 3],
    sa: Score,
    sn: Score,
    cfg: &LossConfig,
) -> f64 {
    let e: Vec<Vec<f64>> = xs.iter().map(|x| p.forward(x).unwrap()).collect();
    directional_triplet_loss(&e[0], &e[1], &e[2], sa, sn, cfg)
        .unwrap()
        .total
}

fn analytic(
    p: &EncoderParams,
    xs: &[Vec<f64>; 3],
    sa: Score,
    sn: Score,
    cfg: &LossConfig,
) -> Gradients {
    let traces: Vec<_> = xs.iter().map(|x| p.forward_trace(x).unwrap()).collect();
    let r = directional_triplet_loss(
        traces[0].output(),
        traces[1].output(),
        traces[2].output(),
        sa,
        sn,
        cfg,
    )
    .unwrap();
    let mut total = Gradients::zeros_like(p);
    for (t, g) in traces.iter().zip([&r.grad_a, &r.grad_p, &r.grad_n]) {
        total.accumulate(&p.backward(t, g).unwrap());
    }
    total
}

/// Distance to the nearest hinge or rectifier kink for this instance.
fn kink_distance(p: &EncoderParams, xs: &[Vec<f64>; 3], sa: f64, sn: f64, cfg: &LossConfig) -> f64 {
    let e: Vec<Vec<f64>> = xs.iter().map(|x| p.forward(x).unwrap()).collect();
    let sq = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let mut d = (cfg.margin_m + sq(&e[0], &e[1]) - sq(&e[0], &e[2])).abs();
    if sa != sn {
        let h = if sn > sa {
            norm(&e[0]) - norm(&e[2]) + cfg.margin_md
        } else {
            norm(&e[2]) - norm(&e[0]) + cfg.margin_md
        };
        d = d.min(h.abs());
    }
    for x in xs {
        let mut h = x.clone();
        for l in 0..p.num_layers() - 1 {
            let fan_in = p.layer_dims()[l];
            let z: Vec<f64> = p.weights()[l]
                .chunks(fan_in)
                .zip(&p.biases()[l])
                .map(|(row, b)| row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + b)
                .collect();
            d = z.iter().fold(d, |m, v| m.min(v.abs()));
            h = z.into_iter().map(|v| v.max(0.0)).collect();
        }
    }
    d
}

#[test]
fn chain_gradients_match_finite_differences() {
    let mut rng = aespace::rng::seeded(404);
    let h = 1e-6;
    let mut checked = 0;
    let mut attempt = 0u64;
    while checked < 10 {
        attempt += 1;
        let dims = [
            rng.random_range(2..=8),
            rng.random_range(2..=8),
            rng.random_range(2..=8),
        ];
        let mut p = EncoderParams::init(&dims, attempt).unwrap();
        let mut biases: Vec<Vec<f64>> = p.biases().to_vec();
        for b in biases.iter_mut().flatten() {
            *b = rng.random_range(-0.2..0.2);
        }
        p = EncoderParams::from_parts(dims.to_vec(), p.weights().to_vec(), biases).unwrap();
        let xs = [0, 1, 2].map(|_| {
            (0..dims[0])
                .map(|_| rng.random_range(-1.0..1.0))
                .collect::<Vec<f64>>()
        });
        let (sa, sn) = (rng.random::<f64>(), rng.random::<f64>());
        let cfg = LossConfig {
            margin_m: rng.random_range(0.1..2.0),
            ..Default::default()
        };
        if kink_distance(&p, &xs, sa, sn, &cfg) < 1e-4 {
            continue;
        }
        let (sa, sn) = (Score::new(sa).unwrap(), Score::new(sn).unwrap());
        let g = analytic(&p, &xs, sa, sn, &cfg);
        for l in 0..p.num_layers() {
            for i in 0..p.weights()[l].len() {
                let bump = |delta: f64| {
                    let mut w = p.weights().to_vec();
                    w[l][i] += delta;
                    let q =
                        EncoderParams::from_parts(dims.to_vec(), w, p.biases().to_vec()).unwrap();
                    chain_loss(&q, &xs, sa, sn, &cfg)
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                let an = g.weights[l][i];
                assert!(
                    (fd - an).abs() <= 1e-4 * an.abs().max(1.0),
                    "w[{l}][{i}]: fd {fd} vs {an}"
                );
            }
            for i in 0..p.biases()[l].len() {
                let bump = |delta: f64| {
                    let mut b = p.biases().to_vec();
                    b[l][i] += delta;
                    let q =
                        EncoderParams::from_parts(dims.to_vec(), p.weights().to_vec(), b).unwrap();
                    chain_loss(&q, &xs, sa, sn, &cfg)
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                let an = g.biases[l][i];
                assert!(
                    (fd - an).abs() <= 1e-4 * an.abs().max(1.0),
                    "b[{l}][{i}]: fd {fd} vs {an}"
                );
            }
        }
        checked += 1;
    }
}
