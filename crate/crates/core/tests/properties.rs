mod common;

use common::{clamp_width, floor_shift, oracle_run, Lcg, OracleParams};
use proptest::prelude::*;
use spikeforge::encoder::{spikes, PoissonEncoder, Xorshift32};
use spikeforge::fixedpoint::{asr, FixedConfig};
use spikeforge::layer::{run_inference, LayerConfig, LeakSchedule, Readout};
use spikeforge::neuron::{NeuronConfig, NeuronState};
use spikeforge::weights::WeightMatrix;

fn layer(
    n_inputs: usize,
    n_outputs: usize,
    timesteps: usize,
    leak: LeakSchedule,
    pruning: bool,
    readout: Readout,
    neuron: NeuronConfig,
) -> LayerConfig {
    LayerConfig {
        n_inputs,
        n_outputs,
        timesteps,
        leak,
        pruning,
        neuron,
        readout,
    }
}

proptest! {
    #[test]
    fn sat_add_stays_in_range(width in 2u32..=32, a in any::<i64>(), b in any::<i64>()) {
        let cfg = FixedConfig::new(width).unwrap();
        let a = cfg.saturate(a);
        let b = b >> (64 - 2 * width.min(31));
        let r = cfg.sat_add(a, b);
        prop_assert!(i64::from(r) >= cfg.min_value() && i64::from(r) <= cfg.max_value());
        prop_assert_eq!(i64::from(r), clamp_width(i64::from(a) + b, width));
        prop_assert_eq!(cfg.sat_add(a, 0), a);
    }

    #[test]
    fn decay_contracts(width in 2u32..=24, v in any::<i64>(), n in 0u32..24) {
        prop_assume!(n < width);
        let cfg = FixedConfig::new(width).unwrap();
        let v = cfg.saturate(v);
        let d = i64::from(cfg.decay(v, n));
        let v = i64::from(v);
        prop_assert!(d.abs() <= v.abs());
        prop_assert!(d == 0 || d.signum() == v.signum());
        prop_assert_eq!(d, v - floor_shift(v, n));
        if v >= 0 && n >= 1 {
            prop_assert!(0 <= d && d <= v);
        }
    }

    #[test]
    fn asr_is_floor_division(v in -(1i64 << 40)..(1i64 << 40), n in 0u32..40) {
        prop_assert_eq!(asr(v, n), floor_shift(v, n));
    }

    #[test]
    fn prng_never_reaches_zero(seed in 1u32.., steps in 1usize..2000) {
        let mut rng = Xorshift32::new(seed).unwrap();
        for _ in 0..steps {
            prop_assert_ne!(rng.next_u32(), 0);
        }
    }

    #[test]
    fn firing_probability_is_monotone(a in any::<u8>(), b in any::<u8>()) {
        let count = |i: u8| (0..=255u8).filter(|&r| spikes(i, r)).count();
        prop_assert_eq!(count(a), usize::from(a));
        if a <= b {
            prop_assert!(count(a) <= count(b));
        }
    }

    #[test]
    fn encoding_is_deterministic(seed in 1u32.., image in prop::collection::vec(any::<u8>(), 1..50), t in 1usize..6) {
        let a = PoissonEncoder::new(seed, image.len()).unwrap().encode_train(&image, t).unwrap();
        let b = PoissonEncoder::new(seed, image.len()).unwrap().encode_train(&image, t).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fired_means_reset_and_threshold_crossed(v0 in 0i64..300, sums in prop::collection::vec(-200i64..200, 1..30)) {
        let cfg = NeuronConfig::default();
        let mut st = NeuronState { potential: cfg.fixed().saturate(v0), ..Default::default() };
        for (t, &s) in sums.iter().enumerate() {
            let before = i64::from(st.potential);
            let expected_pre = {
                let x = clamp_width(before + s, 16);
                x - floor_shift(x, 3)
            };
            match st.step(&cfg, s, true, t) {
                Some(pre) => {
                    prop_assert!(pre >= cfg.threshold());
                    prop_assert_eq!(i64::from(pre), expected_pre);
                    prop_assert_eq!(st.potential, cfg.rest());
                }
                None => prop_assert_eq!(i64::from(st.potential), expected_pre),
            }
        }
    }

    #[test]
    fn replaying_sums_reproduces_trace(sums in prop::collection::vec(-300i64..300, 1..40)) {
        let cfg = NeuronConfig::default();
        let run = || {
            let mut st = NeuronState::default();
            sums.iter().enumerate().map(|(t, &s)| { st.step(&cfg, s, t % 2 == 0, t); st.potential }).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn pruning_does_not_change_first_spikes(
        n_inputs in 1usize..40,
        n_outputs in 1usize..10,
        timesteps in 1usize..16,
        row in prop::option::of(1usize..10),
        seed in 1u32..,
        inst in any::<u64>(),
    ) {
        let mut g = Lcg::new(inst);
        let weights: Vec<i16> = (0..n_inputs * n_outputs).map(|_| g.range(-256, 255) as i16).collect();
        let image: Vec<u8> = (0..n_inputs).map(|_| g.below(256) as u8).collect();
        let w = WeightMatrix::new(n_outputs, n_inputs, 9, 1.0, weights).unwrap();
        let leak = row.map_or(LeakSchedule::PerTimestep, LeakSchedule::PerRow);
        let on = layer(n_inputs, n_outputs, timesteps, leak, true, Readout::FirstToFire, NeuronConfig::default());
        let off = LayerConfig { pruning: false, ..on };
        let a = run_inference(&w, &image, &on, seed).unwrap();
        let b = run_inference(&w, &image, &off, seed).unwrap();
        prop_assert_eq!(&a.first_spike_times, &b.first_spike_times);
        prop_assert_eq!(a.prediction, b.prediction);
        let mut counts = vec![0; n_outputs];
        for e in &a.fires { counts[e.neuron] += 1; }
        prop_assert!(counts.iter().all(|&c| c <= 1));
        prop_assert!(a.total_additions() <= b.total_additions());
        for &adds in &a.additions {
            prop_assert!(adds <= a.max_additions_per_step());
        }
    }
}

#[test]
fn small_instances_match_oracle_in_both_readouts() {
    let mut g = Lcg::new(2024);
    for case in 0..2000u64 {
        let n_inputs = 1 + g.below(6) as usize;
        let n_outputs = 1 + g.below(3) as usize;
        let timesteps = 1 + g.below(4) as usize;
        let row_len = if g.below(2) == 0 { None } else { Some(1 + g.below(3) as usize) };
        let pruning = g.below(2) == 0;
        let first_to_fire = g.below(2) == 0;
        let width = [8u32, 10, 16][g.below(3) as usize];
        let shift = g.below(u64::from(width.min(5))) as u32;
        let threshold = g.range(1, (1 << (width - 1)) - 1);
        let p = OracleParams {
            n_inputs,
            n_outputs,
            timesteps,
            threshold,
            shift,
            width,
            row_len,
            pruning,
            first_to_fire,
        };
        let weights: Vec<Vec<i64>> = (0..n_outputs)
            .map(|_| (0..n_inputs).map(|_| g.range(-256, 255)).collect())
            .collect();
        let image: Vec<u8> = (0..n_inputs).map(|_| g.below(256) as u8).collect();
        let seed = 1 + g.below(u64::from(u32::MAX - 1)) as u32;

        let neuron = NeuronConfig::new(threshold, shift, FixedConfig::new(width).unwrap()).unwrap();
        let cfg = layer(
            n_inputs,
            n_outputs,
            timesteps,
            row_len.map_or(LeakSchedule::PerTimestep, LeakSchedule::PerRow),
            pruning,
            if first_to_fire { Readout::FirstToFire } else { Readout::SpikeCount },
            neuron,
        );
        let flat: Vec<i16> = weights.iter().flatten().map(|&w| w as i16).collect();
        let w = WeightMatrix::new(n_outputs, n_inputs, 9, 1.0, flat).unwrap();
        let got = run_inference(&w, &image, &cfg, seed).unwrap();
        let want = oracle_run(&p, &weights, &image, seed);

        let pots: Vec<Vec<i64>> = got
            .potentials
            .iter()
            .map(|r| r.iter().map(|&v| i64::from(v)).collect())
            .collect();
        assert_eq!(pots, want.potentials, "case {case}: {p:?}");
        let fires: Vec<_> = got
            .fires
            .iter()
            .map(|e| (e.neuron, e.timestep, e.cycle, i64::from(e.pre_reset)))
            .collect();
        assert_eq!(fires, want.fires, "case {case}");
        assert_eq!(got.additions, want.additions, "case {case}");
        assert_eq!(got.first_spike_times, want.first_spike, "case {case}");
        assert_eq!(got.prediction, want.prediction, "case {case}");
        for h in 1..=timesteps {
            assert_eq!(
                got.predict_at(h, cfg.readout),
                common::oracle_predict(&p, &want, h),
                "case {case} horizon {h}"
            );
        }
    }
}

#[test]
fn uniform_image_rate_within_binomial_bound() {
    let pixels = 64;
    let t = 1000;
    let mut enc = PoissonEncoder::new(31337, pixels).unwrap();
    let train = enc.encode_train(&vec![200u8; pixels], t).unwrap();
    let p = 200.0 / 256.0;
    let sigma = (t as f64 * p * (1.0 - p)).sqrt();
    for i in 0..pixels {
        let k = train.iter().filter(|f| f.bits[i]).count() as f64;
        assert!((k - t as f64 * p).abs() <= 3.0 * sigma, "pixel {i}: {k}");
    }
}
