use proptest::prelude::*;
use vlab_core::impairments::{apply_chain, ImpairmentChain, Stage};
use vlab_core::signal::{default_ccdf_thresholds, linear_to_db, papr_ccdf, welch_psd, IqSignal, SimRng, Window};

fn noisy_tone(seed: u64, amp: f64, freq: f64, noise: f64, len: usize) -> IqSignal {
    let mut rng = SimRng::new(seed);
    let samples = (0..len)
        .map(|n| {
            let ph = 2.0 * std::f64::consts::PI * freq * n as f64;
            num_complex::Complex64::from_polar(amp, ph) + rng.complex_gaussian(noise)
        })
        .collect();
    IqSignal::new(samples, 1e4).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn psd_integrates_to_mean_power(
        seed in 0u64..10_000,
        amp in 0.0f64..3.0,
        freq in -0.5f64..0.5,
        noise in 1e-3f64..2.0,
    ) {
        let s = noisy_tone(seed, amp, freq, noise, 8192);
        let psd = welch_psd(&s, 512, 0.5, Window::Hann).unwrap();
        let err = linear_to_db(psd.total_power()) - linear_to_db(s.mean_power());
        prop_assert!(err.abs() < 0.5, "{err}");
    }

    #[test]
    fn ccdf_never_increases(seed in 0u64..10_000, amp in 0.0f64..3.0, noise in 1e-3f64..2.0) {
        let s = noisy_tone(seed, amp, 0.1, noise, 4096);
        let c = papr_ccdf(&s, &default_ccdf_thresholds()).unwrap();
        prop_assert!(c.prob_exceed.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn seeded_chain_is_bit_identical(seed in any::<u64>(), snr in -5.0f64..30.0, lw in 0.0f64..200.0) {
        let s = noisy_tone(1, 1.0, 0.05, 0.01, 1024);
        let chain = ImpairmentChain::new(vec![
            Stage::PhaseNoise { linewidth_hz: lw },
            Stage::Awgn { snr_db: Some(snr), reference_power: None },
        ]);
        let a = apply_chain(&s, &chain, &mut SimRng::new(seed)).unwrap();
        let b = apply_chain(&s, &chain, &mut SimRng::new(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn empty_chain_is_identity(seed in 0u64..1000) {
        let s = noisy_tone(seed, 1.0, 0.2, 0.5, 512);
        prop_assert_eq!(apply_chain(&s, &ImpairmentChain::default(), &mut SimRng::new(seed)).unwrap(), s);
    }
}
