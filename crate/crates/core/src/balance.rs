//! The words-per-flop balance metric.
//!
//! Machine balance `B_M` is sustainable words/s over flops/s, algorithmic
//! balance `B_A` is words per flop of the loop body, and the predicted
//! fraction of peak ("lightspeed") is `min(1, B_M / B_A)`. A word is one
//! 8-byte double.

use num::{One, Signed, Zero};

use crate::exact::{self, Exact};
use crate::kernel::KernelDescription;
use crate::{Error, Result, WORD_BYTES};

/// How intermediate quantities are carried through a balance calculation.
///
/// `SignificantFigures(n)` rounds every intermediate (words/s, `B_M`, `B_A`,
/// lightspeed) to `n` significant figures before it is used in the next step,
/// the way hand-worked tables are produced. The final prediction is not
/// rounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuotePrecision {
    #[default]
    Exact,
    SignificantFigures(u32),
}

impl QuotePrecision {
    fn quote(self, value: Exact) -> Exact {
        match self {
            QuotePrecision::Exact => value,
            QuotePrecision::SignificantFigures(n) => exact::round_significant(&value, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub machine_balance_wf: f64,
    pub algorithmic_balance_wf: f64,
    pub lightspeed: f64,
    pub applicable_peak_gflops: f64,
    pub predicted_gflops: f64,
    pub precision: QuotePrecision,
}

impl BalanceReport {
    pub fn predicted_mflops(&self) -> f64 {
        self.predicted_gflops * 1000.0
    }
}

fn positive(label: &str, value: f64) -> Result<Exact> {
    if value.is_finite() && value > 0.0 {
        Ok(exact::from_f64(value))
    } else {
        Err(Error::Domain(format!(
            "{label} must be positive, got {value}"
        )))
    }
}

/// `B_M` in words/flop.
pub fn machine_balance(bandwidth_gwords_per_s: f64, peak_gflops: f64) -> Result<f64> {
    let bw = positive("bandwidth", bandwidth_gwords_per_s)?;
    let peak = positive("peak performance", peak_gflops)?;
    Ok(exact::to_f64(&(bw / peak)))
}

/// Convert a byte bandwidth in GB/s to GWords/s.
pub fn gbs_to_gwords(bandwidth_gbs: f64) -> f64 {
    exact::to_f64(&(exact::from_f64(bandwidth_gbs) / exact::int(WORD_BYTES as i64)))
}

fn algorithmic_balance_exact(kernel: &KernelDescription, include_rfo: bool) -> Result<Exact> {
    let flops = kernel.flops_per_iteration();
    if flops == 0 {
        return Err(Error::Domain(format!(
            "kernel `{}` performs no flops; balance is undefined, use the cycles-per-cacheline \
             prediction (`predict`) for pure data movement",
            kernel.name
        )));
    }
    let rfo = if include_rfo { kernel.store_streams } else { 0 };
    let words = kernel.load_streams + kernel.store_streams + rfo;
    Ok(exact::ratio(words as i64, flops as i64))
}

/// `B_A` in words/flop. With `include_rfo`, each store stream also costs a
/// read-for-ownership word.
pub fn algorithmic_balance(kernel: &KernelDescription, include_rfo: bool) -> Result<f64> {
    algorithmic_balance_exact(kernel, include_rfo).map(|b| exact::to_f64(&b))
}

pub(crate) fn stream_algorithmic_balance_exact(
    memory_streams: u32,
    rfo_streams: u32,
    flops: u32,
) -> Result<Exact> {
    if memory_streams + rfo_streams == 0 {
        return Err(Error::Domain("at least one stream is required".into()));
    }
    if flops == 0 {
        return Err(Error::Domain("flops per update must be >= 1".into()));
    }
    Ok(exact::ratio(
        (memory_streams + rfo_streams) as i64,
        flops as i64,
    ))
}

/// `B_A` from an explicit stream count, e.g. for stencil regimes.
pub fn stream_algorithmic_balance(
    memory_streams: u32,
    rfo_streams: u32,
    flops: u32,
) -> Result<f64> {
    stream_algorithmic_balance_exact(memory_streams, rfo_streams, flops).map(|b| exact::to_f64(&b))
}

fn prediction_exact(bm: Exact, ba: Exact, peak: Exact, precision: QuotePrecision) -> BalanceReport {
    let bm = precision.quote(bm);
    let ba = precision.quote(ba);
    let raw = &bm / &ba;
    let lightspeed = precision.quote(if raw > Exact::one() {
        Exact::one()
    } else {
        raw
    });
    let predicted = &lightspeed * &peak;
    debug_assert!(lightspeed.is_positive() && !lightspeed.is_zero());
    BalanceReport {
        machine_balance_wf: exact::to_f64(&bm),
        algorithmic_balance_wf: exact::to_f64(&ba),
        lightspeed: exact::to_f64(&lightspeed),
        applicable_peak_gflops: exact::to_f64(&peak),
        predicted_gflops: exact::to_f64(&predicted),
        precision,
    }
}

/// Lightspeed `min(1, bm / ba)` applied to a caller-supplied peak.
pub fn balance_prediction(bm: f64, ba: f64, peak_gflops: f64) -> Result<BalanceReport> {
    Ok(prediction_exact(
        positive("machine balance", bm)?,
        positive("algorithmic balance", ba)?,
        positive("peak performance", peak_gflops)?,
        QuotePrecision::Exact,
    ))
}

/// Full chain from a byte bandwidth: words/s, `B_M`, lightspeed, prediction.
pub fn predict_from_bandwidth(
    bandwidth_gbs: f64,
    algorithmic_balance_wf: f64,
    peak_gflops: f64,
    precision: QuotePrecision,
) -> Result<BalanceReport> {
    let ba = positive("algorithmic balance", algorithmic_balance_wf)?;
    predict_from_bandwidth_exact(bandwidth_gbs, ba, peak_gflops, precision)
}

pub(crate) fn predict_from_bandwidth_exact(
    bandwidth_gbs: f64,
    ba: Exact,
    peak_gflops: f64,
    precision: QuotePrecision,
) -> Result<BalanceReport> {
    let bw = positive("bandwidth", bandwidth_gbs)?;
    let peak = positive("peak performance", peak_gflops)?;
    let words = precision.quote(bw / exact::int(WORD_BYTES as i64));
    let bm = &words / &peak;
    Ok(prediction_exact(bm, ba, peak, precision))
}

/// Balance prediction for a kernel from a byte bandwidth and peak.
pub fn kernel_prediction(
    kernel: &KernelDescription,
    include_rfo: bool,
    bandwidth_gbs: f64,
    peak_gflops: f64,
    precision: QuotePrecision,
) -> Result<BalanceReport> {
    let ba = algorithmic_balance_exact(kernel, include_rfo)?;
    predict_from_bandwidth_exact(bandwidth_gbs, ba, peak_gflops, precision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn machine_balance_examples() {
        assert_eq!(machine_balance(11.32, 11.32).unwrap(), 1.0);
        assert!(close(machine_balance(3.2, 10.64).unwrap(), 0.30, 0.005));
        assert!(close(machine_balance(1.74, 6.65).unwrap(), 0.2617, 5e-5));
        assert!(machine_balance(0.0, 1.0).is_err());
        assert!(machine_balance(1.0, -2.0).is_err());
    }

    #[test]
    fn algorithmic_balance_examples() {
        let triad = KernelDescription::triad();
        assert_eq!(algorithmic_balance(&triad, false).unwrap(), 1.5);
        assert_eq!(algorithmic_balance(&triad, true).unwrap(), 2.0);
        let load_with_flop = KernelDescription::new("sum", 1, 0, 1, 0);
        assert_eq!(algorithmic_balance(&load_with_flop, true).unwrap(), 1.0);
        let err = algorithmic_balance(&KernelDescription::copy(), true).unwrap_err();
        assert!(err.to_string().contains("predict"), "{err}");
    }

    #[test]
    fn stream_balance_examples() {
        assert_eq!(stream_algorithmic_balance(6, 1, 8).unwrap(), 0.875);
        assert_eq!(stream_algorithmic_balance(2, 1, 8).unwrap(), 0.375);
        assert_eq!(stream_algorithmic_balance(4, 1, 8).unwrap(), 0.625);
        assert!(stream_algorithmic_balance(0, 0, 8).is_err());
        assert!(stream_algorithmic_balance(2, 1, 0).is_err());
    }

    #[test]
    fn prediction_examples() {
        let r = balance_prediction(1.0, 2.0, 11.32).unwrap();
        assert_eq!(r.lightspeed, 0.5);
        assert!(close(r.predicted_gflops, 5.66, 1e-12));

        let r = balance_prediction(2.0, 1.0, 10.0).unwrap();
        assert_eq!(r.lightspeed, 1.0);
        assert_eq!(r.predicted_gflops, 10.0);

        // Exact route: 0.2617 / 0.375 = 0.6979 -> 4641 MFlop/s.
        let r = balance_prediction(0.2617, 0.375, 6.65).unwrap();
        assert!(close(r.lightspeed, 0.6979, 1e-4));
    }

    #[test]
    fn quoted_chain_matches_hand_worked_table() {
        // 13.9 GB/s triad, 6.65 GFlop/s mix, 3 significant figures.
        let p = QuotePrecision::SignificantFigures(3);
        for (streams, ba, ls, mflops) in [
            (6, 0.875, 0.299, 1988.35),
            (4, 0.625, 0.419, 2786.35),
            (2, 0.375, 0.699, 4648.35),
        ] {
            let b = stream_algorithmic_balance_exact(streams, 1, 8).unwrap();
            let r = predict_from_bandwidth_exact(13.9, b, 6.65, p).unwrap();
            assert_eq!(r.machine_balance_wf, 0.262);
            assert_eq!(r.algorithmic_balance_wf, ba);
            assert_eq!(r.lightspeed, ls);
            assert!(
                close(r.predicted_mflops(), mflops, 1e-9),
                "{}",
                r.predicted_mflops()
            );
        }
    }

    proptest! {
        #[test]
        fn scaling_leaves_balance_unchanged(bw in 1u32..10_000, peak in 1u32..10_000, ba in 1u32..100, k in 1u32..50) {
            let bw = bw as f64 / 100.0;
            let peak = peak as f64 / 100.0;
            let ba = ba as f64 / 10.0;
            let r1 = predict_from_bandwidth(bw, ba, peak, QuotePrecision::Exact).unwrap();
            let r2 = predict_from_bandwidth(bw * k as f64, ba, peak * k as f64, QuotePrecision::Exact).unwrap();
            prop_assert!((r1.machine_balance_wf - r2.machine_balance_wf).abs() <= 1e-12 * r1.machine_balance_wf);
            prop_assert!((r1.lightspeed - r2.lightspeed).abs() <= 1e-12);
            let f1 = r1.predicted_gflops / r1.applicable_peak_gflops;
            let f2 = r2.predicted_gflops / r2.applicable_peak_gflops;
            prop_assert!((f1 - f2).abs() <= 1e-12);
        }

        #[test]
        fn lightspeed_clamped(bm in 1u32..1000, ba in 1u32..1000, peak in 1u32..1000) {
            let r = balance_prediction(bm as f64 / 100.0, ba as f64 / 100.0, peak as f64).unwrap();
            prop_assert!(r.lightspeed > 0.0 && r.lightspeed <= 1.0);
            prop_assert!(r.predicted_gflops <= r.applicable_peak_gflops);
        }

        #[test]
        fn rfo_never_raises_lightspeed(loads in 0u32..5, stores in 0u32..5, flops in 1u32..8, bw in 1u32..500) {
            prop_assume!(loads + stores > 0);
            let k = KernelDescription::new("k", loads, stores, flops, 0);
            let bw = bw as f64 / 10.0;
            let plain = kernel_prediction(&k, false, bw, 10.0, QuotePrecision::Exact).unwrap();
            let rfo = kernel_prediction(&k, true, bw, 10.0, QuotePrecision::Exact).unwrap();
            prop_assert!(rfo.algorithmic_balance_wf >= plain.algorithmic_balance_wf);
            prop_assert!(rfo.lightspeed <= plain.lightspeed);
        }
    }
}
