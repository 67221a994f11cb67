use proptest::prelude::*;
use rdspoof::channel::{
    analytic_urx_grid, apply_channel_waveform, apply_frequency_offset, ChannelParams, DopplerModel,
};
use rdspoof::dsp::{dft, idft, qam_demap, qam_map, Complex64, ConstellationOrder};
use rdspoof::harness::iq::{decode_iq, encode_iq};
use rdspoof::harness::{random_bits, transmit, validate_assumptions, ExperimentConfig};
use rdspoof::ofdm::{
    build_preamble, demodulate_waveform, modulate_grid, FrameGrid, OfdmConfig, SubcarrierAllocation, PREAMBLE_LEN,
};
use rdspoof::rx::urx_raw_grid;
use rdspoof::spoof::{apply_spoof, spoof_factor, SlowTime, SpoofProfile, SpoofSchedule};

const ORDERS: [ConstellationOrder; 3] = [ConstellationOrder::Bpsk, ConstellationOrder::Qpsk, ConstellationOrder::Qam16];

fn setup() -> (OfdmConfig, SubcarrierAllocation) {
    let c = OfdmConfig::default();
    let a = SubcarrierAllocation::standard(&c).unwrap();
    (c, a)
}

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), len)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

fn energy(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

fn profile() -> impl Strategy<Value = SpoofProfile> {
    (0.0..150.0f64, -60e3..60e3f64).prop_map(|(r, f)| SpoofProfile::new(r, f))
}

fn finite_or_inf() -> impl Strategy<Value = f32> {
    use prop::num::f32;
    f32::POSITIVE | f32::NEGATIVE | f32::NORMAL | f32::SUBNORMAL | f32::ZERO | f32::INFINITE
}

/// Grid with arbitrary values on the active cells.
fn random_grid(alloc: &SubcarrierAllocation, values: &[Complex64], n_symbols: usize) -> FrameGrid {
    let mut g = FrameGrid::zeros(alloc.clone(), n_symbols);
    let active = alloc.active();
    let mut it = values.iter().cycle();
    for m in 0..n_symbols {
        for &k in &active {
            g.symbols[[k, m]] = *it.next().unwrap();
        }
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn parseval_and_inverse(x in prop::sample::select(vec![4usize, 64, 256]).prop_flat_map(complex_vec)) {
        let len = x.len();
        let y = dft(&x).unwrap();
        let ex = energy(&x);
        prop_assert!((ex - energy(&y) / len as f64).abs() <= 1e-10 * ex);
        let back = idft(&y).unwrap();
        let err: f64 = back.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum();
        prop_assert!((err / ex).sqrt() <= 1e-12);
    }

    #[test]
    fn demap_inverts_map(raw in prop::collection::vec(0u8..2, 0..64), which in 0usize..3) {
        let order = ORDERS[which];
        let per = order.bits_per_symbol();
        let bits = &raw[..raw.len() / per * per];
        let symbols = qam_map(bits, order).unwrap();
        let back: Vec<u8> = symbols.iter().flat_map(|&s| qam_demap(s, order).0).collect();
        prop_assert_eq!(back, bits.to_vec());
    }

    #[test]
    fn modulation_round_trip_and_energy(values in complex_vec(56), m in 1usize..6) {
        let (c, a) = setup();
        let grid = random_grid(&a, &values, m);
        let w = modulate_grid(&grid, &c).unwrap();
        prop_assert_eq!(w.samples.len(), PREAMBLE_LEN + m * c.symbol_len());
        let back = demodulate_waveform(&w, m, &c, &a).unwrap();
        let err: f64 = back.symbols.iter().zip(grid.symbols.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
        prop_assert!((err / grid.energy()).sqrt() <= 1e-10);
        for s in 0..m {
            let body = w.marker + s * c.symbol_len() + c.cp_samples;
            let time = energy(&w.samples[body..body + c.n_subcarriers]);
            let freq = energy(&grid.symbols.column(s).to_vec());
            prop_assert!((time - freq).abs() <= 1e-10 * freq);
        }
        for &k in &(0..64).filter(|k| !a.is_active(*k)).collect::<Vec<_>>() {
            prop_assert!(back.symbols.row(k).iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn spoof_has_unit_modulus_and_keeps_energy(values in complex_vec(56), p in profile(), m in 1usize..8) {
        let (c, a) = setup();
        for k in 0..c.n_subcarriers {
            for s in 0..m {
                prop_assert!((spoof_factor(k, s, &p, &c, SlowTime::SymbolTotal).norm() - 1.0).abs() <= 1e-12);
            }
        }
        let grid = random_grid(&a, &values, m);
        let out = apply_spoof(&grid, &SpoofSchedule::single(m, p), &c).unwrap();
        prop_assert!((out.energy() - grid.energy()).abs() <= 1e-12 * grid.energy());
    }

    #[test]
    fn spoofs_compose_additively(values in complex_vec(56), p1 in profile(), p2 in profile(), m in 1usize..6) {
        let (c, a) = setup();
        let grid = random_grid(&a, &values, m);
        let twice = apply_spoof(&apply_spoof(&grid, &SpoofSchedule::single(m, p1), &c).unwrap(), &SpoofSchedule::single(m, p2), &c).unwrap();
        let sum = SpoofProfile::new(p1.range_m + p2.range_m, p1.doppler_hz + p2.doppler_hz);
        let once = apply_spoof(&grid, &SpoofSchedule::single(m, sum), &c).unwrap();
        for (x, y) in twice.symbols.iter().zip(once.symbols.iter()) {
            prop_assert!((x - y).norm() <= 1e-12 * y.norm().max(1.0));
        }
    }

    #[test]
    fn identity_schedule_is_a_no_op(values in complex_vec(56), m in 1usize..6) {
        let (c, a) = setup();
        let grid = random_grid(&a, &values, m);
        prop_assert_eq!(apply_spoof(&grid, &SpoofSchedule::identity(m), &c).unwrap(), grid);
    }

    #[test]
    fn frequency_offset_keeps_magnitudes(values in complex_vec(200), hz in -625e3..625e3f64) {
        let (c, _) = setup();
        let mut w = build_preamble(&c).unwrap();
        w.samples = values;
        let out = apply_frequency_offset(&w, hz);
        for (x, y) in out.samples.iter().zip(&w.samples) {
            prop_assert!((x.norm() - y.norm()).abs() <= 1e-12 * y.norm().max(1.0));
        }
    }

    #[test]
    fn static_channel_is_a_scalar(seed in any::<u64>(), phase in -3.1..3.1f64) {
        let (c, a) = setup();
        let m = 3;
        let order = ConstellationOrder::Qpsk;
        let tx = transmit(random_bits(a.bits_per_frame(order, m), seed), order, &SpoofSchedule::identity(m), &c, &a).unwrap();
        let p = ChannelParams { phase_rad: Some(phase), seed, ..ChannelParams::default() };
        let rx = apply_channel_waveform(&tx.waveform, &p, &c).unwrap();
        let gain = Complex64::from_polar(1.0, phase);
        for (y, x) in rx.samples.iter().zip(&tx.waveform.samples) {
            prop_assert!((y - gain * x).norm() <= 1e-12);
        }
    }

    #[test]
    fn waveform_matches_closed_form(
        seed in any::<u64>(),
        r0 in 0.0..100.0f64,
        v in -150.0..150.0f64,
        p in profile(),
        phase in -3.1..3.1f64,
    ) {
        let (c, a) = setup();
        let m = 8;
        let order = ConstellationOrder::Qam16;
        let sched = SpoofSchedule::single(m, p);
        let tx = transmit(random_bits(a.bits_per_frame(order, m), seed), order, &sched, &c, &a).unwrap();
        let params = ChannelParams { initial_range_m: r0, velocity_mps: v, phase_rad: Some(phase), ..ChannelParams::default() };
        let rx = apply_channel_waveform(&tx.waveform, &params, &c).unwrap();
        let chain = urx_raw_grid(&rx, m, &c, &a).unwrap();
        let closed = analytic_urx_grid(&tx.clean, &params, &sched, &c, 0, DopplerModel::Exact).unwrap();
        let diff: f64 = (&chain.symbols - &closed.symbols).iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((diff / closed.energy()).sqrt() <= 1e-6);
    }

    #[test]
    fn iq_encoding_is_bit_exact(raw in prop::collection::vec((finite_or_inf(), finite_or_inf()), 0..300)) {
        let samples: Vec<Complex64> = raw.iter().map(|&(i, q)| Complex64::new(i as f64, q as f64)).collect();
        let bytes = encode_iq(&samples);
        prop_assert_eq!(bytes.len(), 8 * samples.len());
        let back = decode_iq(&bytes).unwrap();
        for (x, y) in back.iter().zip(&samples) {
            prop_assert_eq!((x.re as f32).to_bits(), (y.re as f32).to_bits());
            prop_assert_eq!((x.im as f32).to_bits(), (y.im as f32).to_bits());
        }
    }

    #[test]
    fn validator_is_total(
        r0 in prop::num::f64::ANY,
        v in prop::num::f64::ANY,
        n in 0usize..200,
        spacing in prop::num::f64::ANY,
        cp in 0usize..100,
        spoofs in prop::collection::vec((prop::num::f64::ANY, prop::num::f64::ANY), 0..3),
    ) {
        let mut cfg = ExperimentConfig::from_toml_str("name = \"total\"\nsnr_db = [10.0]").unwrap();
        cfg.channel.initial_range_m = r0;
        cfg.channel.velocity_mps = v;
        cfg.n_symbols = n;
        cfg.ofdm.subcarrier_spacing = spacing;
        cfg.ofdm.cp_samples = cp;
        cfg.spoof = spoofs.into_iter().map(|(r, f)| SpoofProfile::new(r, f)).collect();
        let report = validate_assumptions(&cfg);
        prop_assert!(!report.checks.is_empty());
        let _ = report.to_string();
        let _ = cfg.check();
    }
}

#[test]
fn constellations_have_unit_mean_power() {
    for order in ORDERS {
        let pts = order.points();
        let mean = energy(&pts) / pts.len() as f64;
        assert!((mean - 1.0).abs() <= 1e-12, "{order:?}: {mean}");
    }
}

#[test]
fn preamble_is_constant() {
    let c = OfdmConfig::default();
    assert_eq!(build_preamble(&c).unwrap(), build_preamble(&c).unwrap());
}
