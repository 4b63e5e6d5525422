//! FFT wrappers and FFT-based circular correlation.
//!
//! Forward transform is the plain unnormalized DFT; the inverse applies the
//! 1/len scale, so `ifft(fft(x)) == x` and Parseval reads
//! `||fft(x)||^2 == len * ||x||^2`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::{Fft, FftPlanner};

use super::{check_finite, fft_add_count, fft_mult_count, C64, CVec, NumericsError, OpCounter};

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)>> =
        OnceLock::new();
    let mut guard = CACHE
        .get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())))
        .lock()
        .expect("fft planner lock");
    let (planner, cache) = &mut *guard;
    cache
        .entry((len, forward))
        .or_insert_with(|| {
            if forward {
                planner.plan_fft_forward(len)
            } else {
                planner.plan_fft_inverse(len)
            }
        })
        .clone()
}

fn transform(x: &[C64], forward: bool, ops: &mut OpCounter) -> Result<CVec, NumericsError> {
    if x.is_empty() {
        return Err(NumericsError::EmptyVector);
    }
    check_finite(x)?;
    let mut buf = x.to_vec();
    plan(x.len(), forward).process(&mut buf);
    if !forward {
        let scale = 1.0 / x.len() as f64;
        for v in &mut buf {
            *v *= scale;
        }
    }
    ops.add_mults(fft_mult_count(x.len()));
    ops.add_adds(fft_add_count(x.len()));
    Ok(buf)
}

/// Unnormalized forward DFT.
pub fn fft(x: &[C64], ops: &mut OpCounter) -> Result<CVec, NumericsError> {
    transform(x, true, ops)
}

/// Inverse DFT with 1/len scaling.
pub fn ifft(x: &[C64], ops: &mut OpCounter) -> Result<CVec, NumericsError> {
    transform(x, false, ops)
}

/// Circular cross-correlation `u[l] = sum_m conj(c[m]) * r[(m + l) mod M]`.
///
/// Computed in the frequency domain at exact length M (no zero padding), so
/// it is valid for any M, including non-powers of two.
pub fn circular_correlate(c: &[C64], r: &[C64], ops: &mut OpCounter) -> Result<CVec, NumericsError> {
    let corr = CorrelatorPlan::new(c, ops)?;
    corr.correlate(r, ops)
}

/// Precomputed spectrum of a fixed reference sequence, for repeated
/// correlations against it. The reference transform is charged once at
/// construction to the supplied counter; each `correlate` call then charges
/// one forward FFT, one pointwise product pass, and one inverse FFT.
pub struct CorrelatorPlan {
    /// conj(FFT(c)), so that ifft(spectrum .* FFT(r)) matches the
    /// correlation sum above.
    spectrum: CVec,
    len: usize,
}

impl CorrelatorPlan {
    pub fn new(c: &[C64], ops: &mut OpCounter) -> Result<Self, NumericsError> {
        if c.is_empty() {
            return Err(NumericsError::EmptyVector);
        }
        check_finite(c)?;
        let spec = fft(c, ops)?;
        Ok(Self {
            spectrum: spec.iter().map(|v| v.conj()).collect(),
            len: c.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn correlate(&self, r: &[C64], ops: &mut OpCounter) -> Result<CVec, NumericsError> {
        if r.len() != self.len {
            return Err(NumericsError::LengthMismatch {
                left: self.len,
                right: r.len(),
            });
        }
        let rf = fft(r, ops)?;
        let prod: CVec = rf
            .iter()
            .zip(&self.spectrum)
            .map(|(a, b)| a * b)
            .collect();
        ops.add_mults(self.len as u64);
        ifft(&prod, ops)
    }
}

/// Exact deconvolution by a fixed reference sequence: for
/// `r = circular_conv(c, h)`, `despread(r)` returns `h` bit for bit (plus
/// whitened noise on noisy input). Unlike plain correlation this removes
/// the reference's autocorrelation sidelobes entirely, at the cost of
/// noise coloration `1/|C_f|` per bin; construction fails if the reference
/// spectrum has a (near-)zero bin. Cost per call matches `CorrelatorPlan`:
/// one forward FFT, one pointwise pass, one inverse FFT.
pub struct DespreaderPlan {
    /// 1 / FFT(c)
    inv_spectrum: CVec,
    len: usize,
}

impl DespreaderPlan {
    pub fn new(c: &[C64], ops: &mut OpCounter) -> Result<Self, NumericsError> {
        if c.is_empty() {
            return Err(NumericsError::EmptyVector);
        }
        check_finite(c)?;
        let spec = fft(c, ops)?;
        // Relative floor: a healthy spreading sequence keeps every bin
        // within a couple orders of magnitude of the flat level sqrt(M).
        let floor = 1e-6 * (c.len() as f64).sqrt();
        if spec.iter().any(|v| v.norm() < floor) {
            return Err(NumericsError::SingularSystem);
        }
        ops.add_mults(c.len() as u64);
        Ok(Self {
            inv_spectrum: spec.iter().map(|v| 1.0 / v).collect(),
            len: c.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn despread(&self, r: &[C64], ops: &mut OpCounter) -> Result<CVec, NumericsError> {
        if r.len() != self.len {
            return Err(NumericsError::LengthMismatch {
                left: self.len,
                right: r.len(),
            });
        }
        let rf = fft(r, ops)?;
        let prod: CVec = rf
            .iter()
            .zip(&self.inv_spectrum)
            .map(|(a, b)| a * b)
            .collect();
        ops.add_mults(self.len as u64);
        ifft(&prod, ops)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{norm_sqr, top_k_support};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn rand_cvec(rng: &mut impl Rng, n: usize) -> CVec {
        (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    /// Independent oracle: direct double loop.
    fn correlate_direct(c: &[C64], r: &[C64]) -> CVec {
        let n = c.len();
        (0..n)
            .map(|l| (0..n).map(|m| c[m].conj() * r[(m + l) % n]).sum())
            .collect()
    }

    #[test]
    fn fft_impulse_and_constant() {
        let mut ops = OpCounter::new();
        let impulse = vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ];
        let f = fft(&impulse, &mut ops).unwrap();
        for v in &f {
            assert!((v - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let ones = vec![C64::new(1.0, 0.0); 4];
        let f = fft(&ones, &mut ops).unwrap();
        assert!((f[0] - C64::new(4.0, 0.0)).norm() < 1e-12);
        for v in &f[1..] {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn fft_rejects_empty() {
        let mut ops = OpCounter::new();
        assert_eq!(fft(&[], &mut ops), Err(NumericsError::EmptyVector));
    }

    #[test]
    fn correlate_constant_example() {
        let mut ops = OpCounter::new();
        let ones = vec![C64::new(1.0, 0.0); 4];
        let u = circular_correlate(&ones, &ones, &mut ops).unwrap();
        for v in &u {
            assert!((v - C64::new(4.0, 0.0)).norm() < 1e-10);
        }
        assert!(ops.complex_mults > 0);
    }

    #[test]
    fn correlate_rejects_length_mismatch() {
        let mut ops = OpCounter::new();
        let a = vec![C64::new(1.0, 0.0); 4];
        let b = vec![C64::new(1.0, 0.0); 5];
        assert!(matches!(
            circular_correlate(&a, &b, &mut ops),
            Err(NumericsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn correlate_matches_direct_oracle_over_random_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xC0441);
        for n in [2usize, 3, 7, 8, 16, 64, 255, 256] {
            for _ in 0..13 {
                let c = rand_cvec(&mut rng, n);
                let r = rand_cvec(&mut rng, n);
                let mut ops = OpCounter::new();
                let got = circular_correlate(&c, &r, &mut ops).unwrap();
                let want = correlate_direct(&c, &r);
                for (g, w) in got.iter().zip(&want) {
                    assert!(
                        (g - w).norm() < 1e-9 * (1.0 + w.norm()),
                        "n={n}: got {g}, want {w}"
                    );
                }
            }
        }
    }

    #[test]
    fn correlate_locates_shift_of_known_sequence() {
        // A shifted copy of the reference correlates to a peak at the shift.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 64;
        let c = rand_cvec(&mut rng, n);
        let shift = 13;
        let r: CVec = (0..n).map(|i| c[(i + n - shift) % n]).collect();
        let mut ops = OpCounter::new();
        let u = circular_correlate(&c, &r, &mut ops).unwrap();
        let peak = top_k_support(&u, 1).unwrap()[0];
        // u[l] = sum conj(c[m]) c[m + l - shift] peaks at l = shift.
        assert_eq!(peak, shift);
    }

    #[test]
    fn despreader_inverts_circular_convolution_exactly() {
        // oracle: build r = circ-conv(c, h) by direct summation, despread,
        // and demand h back to near machine precision
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(314);
        for n in [8usize, 64, 255, 256] {
            let c = rand_cvec(&mut rng, n);
            let h = rand_cvec(&mut rng, n);
            let r: CVec = (0..n)
                .map(|t| (0..n).map(|d| c[(t + n - d) % n] * h[d]).sum())
                .collect();
            let mut ops = OpCounter::new();
            let plan = DespreaderPlan::new(&c, &mut ops).unwrap();
            let got = plan.despread(&r, &mut ops).unwrap();
            for (g, w) in got.iter().zip(&h) {
                assert!((g - w).norm() < 1e-9, "n={n}: got {g}, want {w}");
            }
            assert!(ops.complex_mults > 0);
        }
    }

    #[test]
    fn despreader_kills_sidelobes_correlation_keeps_them() {
        // a +/-1 sequence cycled past its natural period has nonzero
        // off-peak autocorrelation; deconvolution must not
        let pn = crate::signal::pn_sequence(256).unwrap();
        let c: CVec = pn.iter().map(|&v| C64::new(v, 0.0)).collect();
        let mut ops = OpCounter::new();
        // single unit tap at delay 9
        let h: CVec = (0..256)
            .map(|t| C64::new(if t == 9 { 1.0 } else { 0.0 }, 0.0))
            .collect();
        let r: CVec = (0..256).map(|t| c[(t + 256 - 9) % 256]).collect();
        let corr = circular_correlate(&c, &r, &mut ops).unwrap();
        let worst_corr = (0..256)
            .filter(|&t| t != 9)
            .map(|t| corr[t].norm() / 256.0)
            .fold(0.0f64, f64::max);
        let plan = DespreaderPlan::new(&c, &mut ops).unwrap();
        let dec = plan.despread(&r, &mut ops).unwrap();
        let worst_dec = (0..256)
            .filter(|&t| t != 9)
            .map(|t| dec[t].norm())
            .fold(0.0f64, f64::max);
        println!("off-peak: correlation {worst_corr:.4}, deconvolution {worst_dec:.2e}");
        assert!(worst_corr > 0.02, "correlation sidelobes {worst_corr}");
        assert!(worst_dec < 1e-10, "deconvolution leakage {worst_dec}");
        for (g, w) in dec.iter().zip(&h) {
            assert!((g - w).norm() < 1e-10);
        }
    }

    #[test]
    fn despreader_rejects_spectrally_singular_reference() {
        // a constant sequence concentrates everything in the DC bin;
        // every other spectral bin is zero
        let ones = vec![C64::new(1.0, 0.0); 8];
        let mut ops = OpCounter::new();
        assert_eq!(
            DespreaderPlan::new(&ones, &mut ops).err(),
            Some(NumericsError::SingularSystem)
        );
    }

    #[test]
    fn despreader_rejects_length_mismatch() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let c = rand_cvec(&mut rng, 16);
        let mut ops = OpCounter::new();
        let plan = DespreaderPlan::new(&c, &mut ops).unwrap();
        let r = rand_cvec(&mut rng, 17);
        assert!(matches!(
            plan.despread(&r, &mut ops),
            Err(NumericsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn correlator_plan_matches_one_shot_function() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let c = rand_cvec(&mut rng, 256);
        let r = rand_cvec(&mut rng, 256);
        let mut ops_setup = OpCounter::new();
        let plan = CorrelatorPlan::new(&c, &mut ops_setup).unwrap();
        let mut ops_a = OpCounter::new();
        let mut ops_b = OpCounter::new();
        let a = plan.correlate(&r, &mut ops_a).unwrap();
        let b = circular_correlate(&c, &r, &mut ops_b).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
        // The plan amortizes the reference FFT away.
        assert!(ops_a.complex_mults < ops_b.complex_mults);
    }

    proptest! {
        #[test]
        fn parseval_holds(n in 1usize..96, seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = rand_cvec(&mut rng, n);
            let mut ops = OpCounter::new();
            let f = fft(&x, &mut ops).unwrap();
            let lhs = norm_sqr(&f);
            let rhs = n as f64 * norm_sqr(&x);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
        }

        #[test]
        fn ifft_inverts_fft(n in 1usize..96, seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = rand_cvec(&mut rng, n);
            let mut ops = OpCounter::new();
            let back = ifft(&fft(&x, &mut ops).unwrap(), &mut ops).unwrap();
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).norm() < 1e-10);
            }
        }
    }
}
