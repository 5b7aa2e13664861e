//! Oracle checks for the quantizer metrics and the design blocks.
//!
//! The oracle recomputes every metric functional with nothing but nested
//! loops and explicit interval-membership tests, independent of the
//! classification machinery the library uses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ringkey_core::quantizer::{
    self, metrics, JointDistribution, MultiLevelQuantizer, SupportKind,
};

struct Oracle {
    p_c: f64,
    p_cm: f64,
    alpha: Vec<f64>,
    delta: Vec<f64>,
    g: Vec<f64>,
    g_tilde: Vec<f64>,
}

/// Nested-sum recomputation of every metric from interval membership.
fn oracle(q: &MultiLevelQuantizer, p: &JointDistribution) -> Oracle {
    let levels = q.level_count();
    let in_cell = |j: usize, v: f64| -> bool {
        let c = &q.cells()[j];
        v > c.lo && v <= c.hi
    };
    let mut rect = vec![0.0f64; levels * levels];
    for (j, k) in (0..levels).flat_map(|j| (0..levels).map(move |k| (j, k))) {
        let mut s = 0.0;
        for (u, &x) in p.x_support().iter().enumerate() {
            if !in_cell(j, x) {
                continue;
            }
            for (v, &y) in p.y_support().iter().enumerate() {
                if in_cell(k, y) {
                    s += p.mass(u, v);
                }
            }
        }
        rect[j * levels + k] = s;
    }
    let p_c: f64 = rect.iter().sum();
    let p_cm: f64 = (0..levels)
        .flat_map(|j| (0..levels).map(move |k| (j, k)))
        .filter(|(j, k)| j != k)
        .map(|(j, k)| rect[j * levels + k])
        .sum();
    let alpha: Vec<f64> = (0..levels).map(|j| rect[j * levels + j]).collect();
    let delta: Vec<f64> = (0..levels - 1)
        .map(|i| rect[i * levels + i + 1] + rect[(i + 1) * levels + i])
        .collect();
    let g: Vec<f64> = (0..levels)
        .map(|j| (0..levels).map(|k| rect[j * levels + k]).sum::<f64>() / p_c)
        .collect();
    let alpha_sum: f64 = alpha.iter().sum();
    let g_tilde: Vec<f64> = alpha.iter().map(|&a| a / alpha_sum).collect();
    Oracle {
        p_c,
        p_cm,
        alpha,
        delta,
        g,
        g_tilde,
    }
}

fn random_pmf(rng: &mut ChaCha8Rng) -> JointDistribution {
    let nx = rng.random_range(2..=64);
    let ny = rng.random_range(2..=64);
    let support = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        let mut s: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        s.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        s
    };
    let xs = support(rng, nx);
    let ys = support(rng, ny);
    let mass: Vec<f64> = (0..xs.len() * ys.len())
        .map(|_| {
            // Sparse-ish grids exercise empty rows and columns.
            if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random_range(0.0..1.0f64)
            }
        })
        .collect();
    let total: f64 = mass.iter().sum();
    let mass = if total == 0.0 { vec![1.0; xs.len() * ys.len()] } else { mass };
    JointDistribution::from_grid(xs, ys, mass, SupportKind::ExactPmf).unwrap()
}

/// Random structurally valid quantizer with boundaries inside the support
/// span of `p`.
fn random_quantizer(rng: &mut ChaCha8Rng, p: &JointDistribution, bits: u32) -> MultiLevelQuantizer {
    let levels = 1usize << bits;
    let lo = p.x_support().first().unwrap() - 0.5;
    let hi = p.x_support().last().unwrap() + 0.5;
    let mut cuts: Vec<f64> = (0..2 * (levels - 1))
        .map(|_| rng.random_range(lo..hi))
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut pairs = Vec::with_capacity(levels);
    let mut reps = Vec::with_capacity(levels);
    for j in 0..levels {
        let cell_lo = if j == 0 { f64::NEG_INFINITY } else { cuts[2 * j - 1] };
        let cell_hi = if j == levels - 1 { f64::INFINITY } else { cuts[2 * j] };
        if !(cell_lo < cell_hi) {
            // Collided cuts; nudge deterministically.
            return random_quantizer(rng, p, bits);
        }
        pairs.push((cell_lo, cell_hi));
        reps.push(if cell_hi.is_finite() { cell_hi } else { cell_lo + 1.0 });
    }
    match MultiLevelQuantizer::new(pairs, reps) {
        Ok(q) => q,
        Err(_) => random_quantizer(rng, p, bits),
    }
}

#[test]
fn metrics_match_bruteforce_oracle_to_1e12() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC4);
    for trial in 0..100 {
        let p = random_pmf(&mut rng);
        let bits = rng.random_range(1..=3);
        let q = random_quantizer(&mut rng, &p, bits);
        let want = oracle(&q, &p);

        assert!(
            (metrics::consensus_probability(&q, &p) - want.p_c).abs() <= 1e-12,
            "trial {trial}: p_c"
        );
        assert!(
            (metrics::mismatch_mass(&q, &p) - want.p_cm).abs() <= 1e-12,
            "trial {trial}: p_cm"
        );
        let alpha = metrics::alpha_vector(&q, &p);
        let delta = metrics::delta_vector(&q, &p);
        for (got, want_v) in alpha.iter().zip(&want.alpha) {
            assert!((got - want_v).abs() <= 1e-12, "trial {trial}: alpha");
        }
        for (got, want_v) in delta.iter().zip(&want.delta) {
            assert!((got - want_v).abs() <= 1e-12, "trial {trial}: delta");
        }
        if want.p_c > 1e-9 {
            let g = metrics::g_vector(&q, &p).unwrap();
            for (got, want_v) in g.iter().zip(&want.g) {
                assert!((got - want_v).abs() <= 1e-12, "trial {trial}: g");
            }
            let ser = metrics::symbol_error_rate(&q, &p);
            assert!((ser - want.p_cm / want.p_c).abs() <= 1e-12, "trial {trial}: ser");
        }
        if want.alpha.iter().sum::<f64>() > 1e-9 {
            let gt = metrics::g_tilde_vector(&q, &p).unwrap();
            for (got, want_v) in gt.iter().zip(&want.g_tilde) {
                assert!((got - want_v).abs() <= 1e-12, "trial {trial}: g_tilde");
            }
        }
    }
}

#[test]
fn conditional_entropy_matches_oracle_on_correlated_gaussian() {
    let p = JointDistribution::discretized_gaussian(0.99, 1.0, 64, 4.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let q = random_quantizer(&mut rng, &p, 2);
        let want = oracle(&q, &p);
        if want.p_c <= 1e-9 {
            continue;
        }
        let h_want = -want
            .g
            .iter()
            .map(|&g| if g > 0.0 { g * g.log2() } else { 0.0 })
            .sum::<f64>();
        let h_got = metrics::conditional_entropy_bits(&q, &p).unwrap();
        assert!((h_got - h_want).abs() <= 1e-12);
    }
}

/// Widening a single guard band never increases its confusion mass.
#[test]
fn guard_widening_never_increases_delta() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..1000 {
        let rho = rng.random_range(0.0..0.999);
        let std = rng.random_range(0.5..2.0);
        let p = JointDistribution::discretized_gaussian(rho, std, 48, 4.0).unwrap();
        let bits = rng.random_range(1..=3);
        let q = random_quantizer(&mut rng, &p, bits);
        let i = rng.random_range(0..(1usize << bits) - 1);
        let before = metrics::delta_vector(&q, &p)[i];

        // Widen guard i on both sides by random amounts, keeping the
        // structure valid.
        let cells = q.cells();
        let span_lo = cells[i].hi - cells[i].lo.max(-1e3);
        let span_hi = cells[i + 1].hi.min(1e3) - cells[i + 1].lo;
        let shrink_lo = rng.random_range(0.0..span_lo.max(1e-6) * 0.9);
        let shrink_hi = rng.random_range(0.0..span_hi.max(1e-6) * 0.9);
        let mut pairs: Vec<(f64, f64)> = cells.iter().map(|c| (c.lo, c.hi)).collect();
        pairs[i].1 -= shrink_lo;
        pairs[i + 1].0 += shrink_hi;
        if !(pairs[i].0 < pairs[i].1 && pairs[i + 1].0 < pairs[i + 1].1) {
            continue;
        }
        let reps: Vec<f64> = pairs
            .iter()
            .map(|&(lo, hi)| if hi.is_finite() { hi } else { lo + 1.0 })
            .collect();
        let widened = MultiLevelQuantizer::new(pairs, reps).unwrap();
        let after = metrics::delta_vector(&widened, &p)[i];
        assert!(
            after <= before + 1e-15,
            "trial {trial}: delta grew from {before} to {after}"
        );
    }
}

/// Translating a guard right never decreases the diagonal ratio of the cell
/// on its left; translating left never increases it.
#[test]
fn guard_translation_moves_g_tilde_monotonically() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for trial in 0..1000 {
        let rho = rng.random_range(0.0..0.999);
        let std = rng.random_range(0.5..2.0);
        let p = JointDistribution::discretized_gaussian(rho, std, 48, 4.0).unwrap();
        let bits = rng.random_range(1..=2);
        let q = random_quantizer(&mut rng, &p, bits);
        let levels = 1usize << bits;
        let j = rng.random_range(0..levels - 1);
        let before = match metrics::g_tilde_vector(&q, &p) {
            Ok(v) => v[j],
            Err(_) => continue,
        };

        let cells = q.cells();
        // Right translation bounded by the next cell's width.
        let room_right = cells[j + 1].hi.min(1e3) - cells[j + 1].lo;
        let shift = rng.random_range(0.0..room_right.max(1e-6) * 0.9);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let room_left = cells[j].hi - cells[j].lo.max(-1e3);
        let shift = if sign < 0.0 {
            -rng.random_range(0.0..room_left.max(1e-6) * 0.9)
        } else {
            shift
        };
        let mut pairs: Vec<(f64, f64)> = cells.iter().map(|c| (c.lo, c.hi)).collect();
        pairs[j].1 += shift;
        pairs[j + 1].0 += shift;
        let valid = pairs[j].0 < pairs[j].1
            && pairs[j + 1].0 < pairs[j + 1].1
            && pairs[j].1 <= pairs[j + 1].0;
        if !valid {
            continue;
        }
        let reps: Vec<f64> = pairs
            .iter()
            .map(|&(lo, hi)| if hi.is_finite() { hi } else { lo + 1.0 })
            .collect();
        let translated = MultiLevelQuantizer::new(pairs, reps).unwrap();
        let after = match metrics::g_tilde_vector(&translated, &p) {
            Ok(v) => v[j],
            Err(_) => continue,
        };
        if shift >= 0.0 {
            assert!(after >= before - 1e-15, "trial {trial}: right shift decreased g~");
        } else {
            assert!(after <= before + 1e-15, "trial {trial}: left shift increased g~");
        }
    }
}

/// The refining block only grows guards, so the mismatch mass cannot grow.
#[test]
fn refining_never_increases_mismatch_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..50 {
        let rho = rng.random_range(0.3..0.999);
        let p = JointDistribution::discretized_gaussian(rho, 1.0, 96, 4.0).unwrap();
        let bits = rng.random_range(1..=2);
        let step = p.default_step();
        // Grid-aligned input from the other blocks.
        let q0 = match quantizer::init_block(&p, bits, Some(step)) {
            Ok(q) => q,
            Err(_) => continue,
        };
        let q1 = quantizer::error_block(&q0, &p, 1e-2, Some(step)).unwrap_or(q0);
        let before = metrics::mismatch_mass(&q1, &p);
        if let Ok(q2) = quantizer::refining_block(&q1, &p, Some(step)) {
            let after = metrics::mismatch_mass(&q2, &p);
            assert!(after <= before + 1e-12);
            for i in 0..(1usize << bits) - 1 {
                assert!(q2.guard_width(i) >= q1.guard_width(i) - 1e-12);
            }
        }
    }
}

/// Structural invariants hold after every block on randomized runs.
#[test]
fn blocks_preserve_definition_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..50 {
        let rho = rng.random_range(0.0..0.999);
        let p = JointDistribution::discretized_gaussian(rho, 1.0, 64, 4.0).unwrap();
        let bits = rng.random_range(1..=2);
        let step = p.default_step();
        let Ok(q0) = quantizer::init_block(&p, bits, Some(step)) else {
            continue;
        };
        q0.validate().unwrap();
        let q1 = quantizer::error_block(&q0, &p, 1e-3, Some(step)).unwrap_or_else(|_| q0.clone());
        q1.validate().unwrap();
        let q2 = quantizer::entropy_block(&q1, &p, Some(step)).unwrap_or_else(|_| q1.clone());
        q2.validate().unwrap();
        let q3 = quantizer::refining_block(&q2, &p, Some(step)).unwrap_or_else(|_| q2.clone());
        q3.validate().unwrap();
    }
}

/// Excursion-level conditional entropy of a converged design stays within
/// 0.05 bits of `b` for short excursions.
#[test]
fn excursion_entropy_stays_near_b() {
    let gamma = 0.01f64;
    let rho = 1.0 / (1.0 + gamma);
    let std = ((1.0 + gamma) / 2.0).sqrt();
    let p = JointDistribution::discretized_gaussian(rho, std, 256, 5.0).unwrap();
    for bits in [1u32, 2] {
        let r = quantizer::design_for_target(&p, bits, 1e-3, 1, None).unwrap();
        assert!(r.feasible, "bits {bits}");
        for e in [2u32, 3] {
            let h = metrics::excursion_conditional_entropy_bits(&r.quantizer, &p, e).unwrap();
            assert!(
                (bits as f64 - h).abs() <= 0.05,
                "bits {bits}, e {e}: entropy {h}"
            );
        }
    }
}
