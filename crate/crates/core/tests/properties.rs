use istbc::channel::complex_gaussian;
use istbc::decoder::Detection;
use istbc::design::symbol_coords;
use istbc::fixedpoint::grid_step;
use istbc::montecarlo::wilson_interval;
use istbc::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_symbols(rng: &mut impl Rng, c: &Constellation, count: usize) -> Vec<Complex64> {
    let pts = c.complex_points();
    (0..count).map(|_| pts[rng.random_range(0..pts.len())]).collect()
}

fn all_designs() -> Vec<(LinearDesign, u32)> {
    vec![
        (integer_design(2, 2).unwrap(), 2),
        (integer_design(2, 4).unwrap(), 4),
        (integer_design(3, 2).unwrap(), 2),
        (integer_design(4, 2).unwrap(), 2),
        (alamouti_design(), 4),
        (golden_design(), 2),
    ]
}

proptest! {
    #[test]
    fn encoding_is_linear(a in prop::collection::vec(-5.0f64..5.0, 8), b in prop::collection::vec(-5.0f64..5.0, 8), s in -3.0f64..3.0) {
        for d in [integer_design(2, 2).unwrap(), golden_design()] {
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
            let mut want = d.encode_coords(&a).unwrap();
            want.add_scaled(&d.encode_coords(&b).unwrap(), s);
            prop_assert!(d.encode_coords(&sum).unwrap().max_abs_diff(&want) < 1e-9);
        }
    }

    #[test]
    fn quantizer_error_is_bounded(y in -1.0f64..1.0, q in 2u32..=20) {
        let y = y.min(1.0 - grid_step(q));
        let v = quantize(y, q).unwrap();
        prop_assert!((v - y).abs() <= grid_step(q));
        prop_assert_eq!(quantize(v, q).unwrap(), v);
    }

    #[test]
    fn quantizer_is_monotone(a in -1.0f64..1.0, b in -1.0f64..1.0, q in 2u32..=20) {
        let top = 1.0 - grid_step(q);
        let (lo, hi) = if a <= b { (a.min(top), b.min(top)) } else { (b.min(top), a.min(top)) };
        prop_assert!(quantize(lo, q).unwrap() <= quantize(hi, q).unwrap());
    }
}

#[test]
fn distinct_symbols_give_distinct_codewords() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (d, m) in all_designs() {
        let c = make_qam(m).unwrap();
        for _ in 0..10_000 {
            let a = random_symbols(&mut rng, &c, d.num_symbols());
            let b = random_symbols(&mut rng, &c, d.num_symbols());
            if a == b {
                continue;
            }
            let diff = encode(&d, &c, &a)
                .unwrap()
                .entries
                .max_abs_diff(&encode(&d, &c, &b).unwrap().entries);
            assert!(diff > 1e-9, "{} maps two symbol vectors to one codeword", d.name());
        }
    }
}

#[test]
fn integer_entries_stay_within_dynamic_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (n, m) in [(2, 2), (2, 4), (2, 6), (3, 4), (4, 2)] {
        let d = integer_design(n, m).unwrap();
        let c = make_qam(m).unwrap();
        let bound = (1i64 << (m as usize * n / 2)) - 1;
        for _ in 0..2_000 {
            let x = encode(&d, &c, &random_symbols(&mut rng, &c, n * n)).unwrap();
            for z in x.entries.to_gaussian().unwrap() {
                assert!(z.re.abs() <= bound && z.im.abs() <= bound);
                assert!(z.re % 2 != 0 && z.im % 2 != 0);
            }
        }
    }
}

#[test]
fn integer_entry_alphabet_is_larger_qam() {
    let d = integer_design(2, 2).unwrap();
    let c = make_qam(2).unwrap();
    let big = make_qam(4).unwrap();
    let pts = c.complex_points();
    let mut want: Vec<(i64, i64)> = big.points().iter().map(|p| (p.re as i64, p.im as i64)).collect();
    want.sort();
    for pos in 0..4 {
        let mut seen: Vec<(i64, i64)> = (0..256usize)
            .map(|idx| {
                let syms: Vec<Complex64> = (0..4).map(|t| pts[(idx >> (2 * t)) & 3]).collect();
                let z = encode(&d, &c, &syms).unwrap().entries.to_gaussian().unwrap()[pos];
                (z.re, z.im)
            })
            .collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen, want, "entry {pos}");
    }
}

#[test]
fn effective_channel_matches_direct_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (d, m) in all_designs() {
        let c = make_qam(m).unwrap();
        let n = d.n();
        for _ in 0..1_000 {
            let syms = random_symbols(&mut rng, &c, d.num_symbols());
            let x = encode(&d, &c, &syms).unwrap();
            let h = sample_channel(n, 0.0, &mut rng).unwrap().h;
            let direct = (&h * &x.entries).scale(1.0 / (n as f64).sqrt());
            let g = effective_channel(&d, &h).unwrap();
            let via_g = g.mul_vec(&symbol_coords(&syms));
            let stacked: Vec<f64> = direct.as_slice().iter().flat_map(|z| [z.re, z.im]).collect();
            let worst = via_g
                .iter()
                .zip(&stacked)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-12, "{}: {worst}", d.name());
        }
    }
}

#[test]
fn golden_quantization_error_shrinks_with_bits() {
    let d = golden_design();
    let c = make_qam(2).unwrap();
    let pts = c.complex_points();
    let worst: Vec<f64> = (4..=12)
        .map(|q| {
            let enc = QuantizedEncoder::new(&d, &c, q).unwrap();
            (0..256usize)
                .map(|idx| {
                    let syms: Vec<Complex64> = (0..4).map(|t| pts[(idx >> (2 * t)) & 3]).collect();
                    enc.encode(&syms)
                        .unwrap()
                        .entries
                        .max_abs_diff(&encode(&d, &c, &syms).unwrap().entries)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(worst.windows(2).all(|w| w[1] <= w[0]), "{worst:?}");
    assert!(worst[worst.len() - 1] > 0.0);
}

struct Instance {
    design: LinearDesign,
    constellation: Constellation,
    scale: f64,
    h: CMatrix,
    y: CMatrix,
    sent: Vec<Complex64>,
}

fn instance(rng: &mut impl Rng, m: u32, snr_db: f64) -> Instance {
    let design = integer_design(2, m).unwrap();
    let constellation = make_qam(m).unwrap();
    let scale = normalize(&design, &constellation).unwrap();
    let sent = random_symbols(rng, &constellation, 4);
    let x = encode(&design, &constellation, &sent).unwrap().normalized(scale);
    let sigma2 = operating_point(0.5, snr_db, 1.0, false).unwrap();
    let ch = sample_channel(2, sigma2, rng).unwrap();
    let y = transmit(&x, &ch, rng).unwrap();
    Instance {
        design,
        constellation,
        scale,
        h: ch.h,
        y,
        sent,
    }
}

impl Instance {
    fn problem(&self) -> DetectionProblem {
        DetectionProblem::for_design(&self.design, &self.constellation, self.scale, &self.h, &self.y)
            .unwrap()
    }
}

#[test]
fn sphere_result_ignores_initial_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..300 {
        let snr = rng.random_range(0.0..20.0);
        let inst = instance(&mut rng, 2, snr);
        let p = inst.problem();
        let free = sphere_decode(&p, None).unwrap();
        for r in [1e-6, 0.1, 1.0, 10.0, 1e6] {
            assert_eq!(sphere_decode(&p, Some(r)).unwrap().indices, free.indices);
        }
    }
}

#[test]
fn common_phase_rotation_keeps_decision() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let snr = rng.random_range(0.0..20.0);
        let inst = instance(&mut rng, 2, snr);
        let base = sphere_decode(&inst.problem(), None).unwrap();
        let phase = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
        let rotated = Instance {
            h: inst.h.scale_complex(phase),
            y: inst.y.scale_complex(phase),
            ..inst
        };
        let rot: Detection = sphere_decode(&rotated.problem(), None).unwrap();
        assert_eq!(rot.indices, base.indices);
        assert!((rot.metric - base.metric).abs() < 1e-9 * (1.0 + base.metric));
    }
}

#[test]
fn sphere_work_falls_with_snr() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draws: Vec<u64> = (0..400).map(|_| rng.random()).collect();
    let mean_nodes: Vec<f64> = [0.0, 10.0, 20.0, 30.0]
        .iter()
        .map(|&snr| {
            let total: u64 = draws
                .iter()
                .map(|&s| {
                    let inst = instance(&mut ChaCha8Rng::seed_from_u64(s), 4, snr);
                    sphere_decode(&inst.problem(), None).unwrap().visited_nodes
                })
                .sum();
            total as f64 / draws.len() as f64
        })
        .collect();
    assert!(mean_nodes.windows(2).all(|w| w[1] <= w[0]), "{mean_nodes:?}");
}

#[test]
fn noiseless_detection_recovers_symbols() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for m in [2, 4] {
        for _ in 0..100 {
            let mut inst = instance(&mut rng, m, 0.0);
            let x = encode(&inst.design, &inst.constellation, &inst.sent)
                .unwrap()
                .normalized(inst.scale);
            inst.y = (&inst.h * &x.entries).scale(0.5f64.sqrt());
            let d = sphere_decode(&inst.problem(), None).unwrap();
            let want: Vec<f64> = symbol_coords(&inst.sent).iter().map(|v| v * inst.scale).collect();
            assert!(d.coords.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12));
            assert!(d.metric < 1e-20);
        }
    }
}

#[test]
fn channel_gain_has_unit_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let draws = 100_000;
    let total: f64 = (0..draws)
        .map(|_| sample_channel(2, 0.0, &mut rng).unwrap().h.frobenius_sq())
        .sum();
    let mean = total / (4 * draws) as f64;
    assert!((mean - 1.0).abs() < 0.02, "{mean}");
}

#[test]
fn noise_is_white() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draws = 200_000;
    let (mut p0, mut p1, mut cross, mut pseudo) = (0.0, 0.0, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for _ in 0..draws {
        let a = complex_gaussian(&mut rng, 0.5);
        let b = complex_gaussian(&mut rng, 0.5);
        p0 += a.norm_sqr();
        p1 += b.norm_sqr();
        cross += a * b.conj();
        pseudo += a * a;
    }
    let d = draws as f64;
    assert!((p0 / d - 0.5).abs() < 0.01 && (p1 / d - 0.5).abs() < 0.01);
    assert!(cross.norm() / d < 0.01);
    assert!(pseudo.norm() / d < 0.01);
}

#[test]
fn received_energy_adds_signal_and_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let d = golden_design();
    let c = make_qam(2).unwrap();
    let scale = normalize(&d, &c).unwrap();
    let x = encode(&d, &c, &random_symbols(&mut rng, &c, 4)).unwrap().normalized(scale);
    let sigma2 = 0.3;
    let draws = 100_000;
    let total: f64 = (0..draws)
        .map(|_| {
            let ch = sample_channel(2, sigma2, &mut rng).unwrap();
            transmit(&x, &ch, &mut rng).unwrap().frobenius_sq()
        })
        .sum();
    let want = x.entries.frobenius_sq() + 4.0 * sigma2;
    assert!((total / draws as f64 / want - 1.0).abs() < 0.02);
}

#[test]
fn normalized_codewords_have_unit_power_per_channel_use() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (d, m) in all_designs() {
        let c = make_qam(m).unwrap();
        let scale = normalize(&d, &c).unwrap();
        let n = d.n();
        let draws = 20_000;
        let total: f64 = (0..draws)
            .map(|_| {
                encode(&d, &c, &random_symbols(&mut rng, &c, d.num_symbols()))
                    .unwrap()
                    .normalized(scale)
                    .entries
                    .frobenius_sq()
            })
            .sum();
        let per_use = total / (draws * n) as f64;
        assert!((per_use - 1.0).abs() < 0.03, "{}: {per_use}", d.name());
    }
}

#[test]
fn wilson_width_scales_with_root_trials() {
    let (lo1, hi1) = wilson_interval(1_000, 10_000, 0.95);
    let (lo4, hi4) = wilson_interval(4_000, 40_000, 0.95);
    let (lo100, hi100) = wilson_interval(100_000, 1_000_000, 0.95);
    let w1 = hi1 - lo1;
    assert!(((hi4 - lo4) / w1 - 0.5).abs() < 0.01);
    assert!(((hi100 - lo100) / w1 - 0.1).abs() < 0.01);
}

#[test]
fn results_round_trip_through_json() {
    let mut cfg = SimConfig::new(DesignId::Integer, 2, 2, vec![0.0, 4.0]);
    cfg.target_errors = 20;
    cfg.seed = 3;
    let r = run_cer(&cfg).unwrap();
    let back: SimResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
}
