//! Closed-form MMSE design of FRESH filters from periodic statistics.
//!
//! A FRESH filter with cyclic frequencies `alpha_p` and `L` taps per branch
//! computes `y[n] = sum_p sum_q conj(h_p[q]) x[n - q] e^{-j 2 pi alpha_p (n - q)}`,
//! i.e. `y = h^H z[n]` with regressor entry `u = p L + q`. The optimum
//! solves `<C_zz> h = <c_zd>` with both sides averaged over time.
//!
//! Every filter estimates its target `delay` samples late, `y[n] ~ d[n - delay]`,
//! so taps on both sides of the target sample are available.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // needed for float methods without std
use num_traits::Float;

use crate::cyclic::{Averaging, CyclicSpectrum};
use crate::linalg::{hermitian_solve, symmetric_solve, HermitianMatrix, SymmetricMatrix};
use crate::signal::{unit_phasor, PeriodicAutocorrelation};
use crate::{Error, Result};

const FREQ_TOL: f64 = 1e-12;

/// Cyclic frequencies and coefficients of one FRESH filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FreshFilterSpec {
    pub freqs: Vec<f64>,
    pub fir_len: usize,
    /// Branch-major coefficients, `coeffs[p * fir_len + q]`.
    pub coeffs: Vec<Complex64>,
    /// Lag of the target sample behind the newest input sample.
    pub delay: usize,
}

impl FreshFilterSpec {
    pub fn new(freqs: Vec<f64>, fir_len: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if freqs.is_empty() || fir_len == 0 {
            return Err(Error::Config("a FRESH filter needs at least one branch and one tap".into()));
        }
        if coeffs.len() != freqs.len() * fir_len {
            return Err(Error::Shape(format!(
                "{} coefficients for {} branches of {} taps",
                coeffs.len(),
                freqs.len(),
                fir_len
            )));
        }
        if freqs.iter().any(|f| !f.is_finite()) {
            return Err(Error::Config("cyclic frequencies must be finite".into()));
        }
        Ok(Self { freqs, fir_len, coeffs, delay: 0 })
    }

    pub fn with_delay(mut self, delay: usize) -> Result<Self> {
        if delay >= self.fir_len {
            return Err(Error::Config(format!("delay {delay} outside a {}-tap filter", self.fir_len)));
        }
        self.delay = delay;
        Ok(self)
    }

    pub fn shape(&self) -> FilterShape {
        FilterShape { freqs: self.freqs.clone(), fir_len: self.fir_len, delay: self.delay }
    }

    pub fn zeros(freqs: Vec<f64>, fir_len: usize) -> Result<Self> {
        let n = freqs.len() * fir_len;
        Self::new(freqs, fir_len, vec![Complex64::default(); n])
    }

    /// Pass-through: unit tap at lag `delay` of the zero-frequency branch.
    pub fn selector(freqs: Vec<f64>, fir_len: usize, delay: usize) -> Result<Self> {
        let mut f = Self::zeros(freqs, fir_len)?.with_delay(delay)?;
        let p = f.zero_branch().ok_or_else(|| Error::Config("no zero-frequency branch".into()))?;
        f.coeffs[p * fir_len + delay] = Complex64::new(1.0, 0.0);
        Ok(f)
    }

    pub fn branches(&self) -> usize {
        self.freqs.len()
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, branch: usize, tap: usize) -> Complex64 {
        self.coeffs[branch * self.fir_len + tap]
    }

    pub fn zero_branch(&self) -> Option<usize> {
        self.freqs.iter().position(|f| is_zero_freq(*f))
    }
}

/// Frequencies, length and target delay of a filter to be designed.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterShape {
    pub freqs: Vec<f64>,
    pub fir_len: usize,
    pub delay: usize,
}

impl FilterShape {
    pub fn new(freqs: Vec<f64>, fir_len: usize, delay: usize) -> Self {
        Self { freqs, fir_len, delay }
    }

    pub fn causal(freqs: Vec<f64>, fir_len: usize) -> Self {
        Self::new(freqs, fir_len, 0)
    }

    /// Target in the middle of the tap span.
    pub fn centered(freqs: Vec<f64>, fir_len: usize) -> Self {
        Self::new(freqs, fir_len, fir_len / 2)
    }

    fn validate(&self, role: &str) -> Result<()> {
        if self.freqs.is_empty() || self.fir_len == 0 {
            return Err(Error::Config(format!("{role} needs at least one branch and one tap")));
        }
        if !self.freqs.iter().any(|f| is_zero_freq(*f)) {
            return Err(Error::Config(format!("{role} must include the zero cyclic frequency")));
        }
        if self.delay >= self.fir_len {
            return Err(Error::Config(format!("{role} delay {} outside {} taps", self.delay, self.fir_len)));
        }
        for (i, a) in self.freqs.iter().enumerate() {
            if self.freqs[..i].iter().any(|b| is_zero_freq(a - b)) {
                return Err(Error::Config(format!("{role} frequency {a} aliases another branch")));
            }
        }
        Ok(())
    }
}

fn is_zero_freq(f: f64) -> bool {
    (f - f.round()).abs() < FREQ_TOL
}

/// Noise estimator followed by signal extractor on the cleaned input
/// `t[n] = r[n - h1.delay] - w_hat[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageReceiver {
    pub h1: FreshFilterSpec,
    pub h2: FreshFilterSpec,
}

impl TwoStageReceiver {
    /// Lag of the output behind the input.
    pub fn delay(&self) -> usize {
        self.h1.delay + self.h2.delay
    }
}

/// `k / period` for `k` in `-(count/2) ..= count/2` (count odd) or the
/// nearest symmetric set for even counts.
pub fn symmetric_freqs(count: usize, period: usize) -> Vec<f64> {
    let half = (count / 2) as i64;
    let lo = -half;
    let hi = if count % 2 == 1 { half } else { half - 1 };
    (lo..=hi).map(|k| k as f64 / period as f64).collect()
}

/// Frequencies a receiver would use if it believed the noise period were
/// `period * (1 + delta)`: `k / (period (1 + delta))`, zero branch unchanged.
pub fn with_cyclic_freq_error(freqs: &[f64], period: usize, delta: f64) -> Vec<f64> {
    freqs
        .iter()
        .map(|&f| {
            let k = (f * period as f64).round();
            k / (period as f64 * (1.0 + delta))
        })
        .collect()
}

/// Statistics of the desired signal and the noise.
#[derive(Debug, Clone)]
pub struct DesignInputs {
    pub c_dd: PeriodicAutocorrelation,
    pub c_ww: PeriodicAutocorrelation,
    pub averaging: Averaging,
}

impl DesignInputs {
    pub fn new(c_dd: PeriodicAutocorrelation, c_ww: PeriodicAutocorrelation) -> Self {
        Self { c_dd, c_ww, averaging: Averaging::LongRun }
    }

    /// Common averaging period of the two processes.
    pub fn period(&self) -> usize {
        crate::signal::lcm(self.c_dd.period(), self.c_ww.period())
    }
}

/// Reusable cyclic components of the desired signal and of the noise. The
/// noise enters scaled by `noise_gain`, so one context serves a whole SNR
/// sweep.
#[derive(Debug, Clone)]
pub struct DesignContext {
    dd: CyclicSpectrum,
    ww: CyclicSpectrum,
    noise_gain: f64,
    desired_power: f64,
    noise_power: f64,
}

/// Which process a cross-correlation vector targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Desired,
    Noise,
}

impl DesignContext {
    /// `max_lag` bounds every `|tau|` the designs will request.
    pub fn new(inputs: &DesignInputs, max_lag: usize) -> Self {
        Self {
            desired_power: inputs.c_dd.average_power(),
            noise_power: inputs.c_ww.average_power(),
            dd: CyclicSpectrum::new(inputs.c_dd.clone(), inputs.averaging, max_lag),
            ww: CyclicSpectrum::new(inputs.c_ww.clone(), inputs.averaging, max_lag),
            noise_gain: 1.0,
        }
    }

    pub fn set_noise_gain(&mut self, gain: f64) {
        self.noise_gain = gain;
    }

    pub fn noise_gain(&self) -> f64 {
        self.noise_gain
    }

    /// `<c_dd(n, 0)>`.
    pub fn desired_power(&self) -> f64 {
        self.desired_power
    }

    /// Time-averaged noise power after scaling.
    pub fn noise_power(&self) -> f64 {
        self.noise_power * self.noise_gain
    }

    fn max_lag(&self) -> usize {
        self.dd.max_lag()
    }

    fn check_lag(&self, lag: usize) -> Result<()> {
        if lag > self.max_lag() {
            return Err(Error::LagOutOfRange { lag: lag as i64, max_lag: self.max_lag() });
        }
        Ok(())
    }

    /// Received-signal component over all lags, or `None` when zero.
    fn rr_component(&mut self, nu: f64) -> Result<Option<Vec<Complex64>>> {
        let g = self.noise_gain;
        let d = self.dd.component(nu)?.map(|c| c.to_vec());
        let w = self.ww.component(nu)?;
        Ok(match (d, w) {
            (None, None) => None,
            (Some(d), None) => Some(d),
            (None, Some(w)) => Some(w.iter().map(|v| v * g).collect()),
            (Some(mut d), Some(w)) => {
                d.iter_mut().zip(w).for_each(|(a, b)| *a += b * g);
                Some(d)
            }
        })
    }

    fn target_component(&mut self, target: Target, nu: f64) -> Result<Option<Vec<Complex64>>> {
        let g = self.noise_gain;
        Ok(match target {
            Target::Desired => self.dd.component(nu)?.map(|c| c.to_vec()),
            Target::Noise => self.ww.component(nu)?.map(|c| c.iter().map(|v| v * g).collect()),
        })
    }

    /// Time-averaged regressor correlation of a FRESH filter applied to the
    /// received signal: entry `(pL+q, p'L+q')` equals
    /// `e^{-j 2 pi alpha_p (q'-q)} C_rr^{alpha_p - alpha_p'}(q' - q)`.
    pub fn correlation_matrix(&mut self, freqs: &[f64], fir_len: usize) -> Result<HermitianMatrix> {
        self.check_lag(fir_len.saturating_sub(1))?;
        let k = freqs.len();
        let dim = k * fir_len;
        let m = self.max_lag() as i64;
        let mut out = HermitianMatrix::zeros(dim);
        for p in 0..k {
            let rot: Vec<Complex64> = (-(fir_len as i64) + 1..fir_len as i64)
                .map(|tau| unit_phasor(freqs[p] * tau as f64))
                .collect();
            for pp in 0..k {
                let Some(comp) = self.rr_component(freqs[p] - freqs[pp])? else { continue };
                for q in 0..fir_len {
                    for qq in 0..fir_len {
                        let tau = qq as i64 - q as i64;
                        let v = rot[(tau + fir_len as i64 - 1) as usize] * comp[(tau + m) as usize];
                        out.set(p * fir_len + q, pp * fir_len + qq, v);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Cross-correlation with `x[n - delay]`: entry `pL+q` equals
    /// `e^{j 2 pi alpha_p (q-D)} C_target^{alpha_p}(D-q)` for delay `D`.
    pub fn cross_vector(
        &mut self,
        target: Target,
        freqs: &[f64],
        fir_len: usize,
        delay: usize,
    ) -> Result<Vec<Complex64>> {
        self.check_lag(fir_len.saturating_sub(1).max(delay))?;
        let m = self.max_lag() as i64;
        let mut out = vec![Complex64::default(); freqs.len() * fir_len];
        for (p, &a) in freqs.iter().enumerate() {
            let Some(comp) = self.target_component(target, a)? else { continue };
            for q in 0..fir_len {
                let j = q as i64 - delay as i64;
                out[p * fir_len + q] = unit_phasor(-a * j as f64) * comp[(m - j) as usize];
            }
        }
        Ok(out)
    }

    /// Statistics of the second-stage regressor built on
    /// `t[n] = r[n - D1] - h1^H r_vec`: the correlation matrix of `t[n - i]
    /// e^{-j 2 pi beta_k (n - i)}` and its cross-correlation with
    /// `d[n - D1 - D2]`, where `D1 = h1.delay` and `D2 = shape.delay`.
    pub fn second_stage_stats(
        &mut self,
        h1: &FreshFilterSpec,
        shape: &FilterShape,
    ) -> Result<(HermitianMatrix, Vec<Complex64>)> {
        let (freqs, fir_len) = (&shape.freqs[..], shape.fir_len);
        let l1 = h1.fir_len;
        let k1 = h1.branches();
        let total_delay = (h1.delay + shape.delay) as i64;
        self.check_lag((l1 + fir_len - 2).max(total_delay as usize))?;
        let zero = h1.zero_branch().ok_or_else(|| {
            Error::Config("noise estimator must include the zero cyclic frequency".into())
        })?;
        // a_m[l] = [m = zero, l = D1] - conj(h1_m[l]); t[n] = sum a_m[l] r[n-l] e^{-j2pi alpha_m (n-l)}.
        let mut a: Vec<Vec<Complex64>> = (0..k1)
            .map(|m| (0..l1).map(|l| -h1.coeff(m, l).conj()).collect())
            .collect();
        a[zero][h1.delay] += Complex64::new(1.0, 0.0);
        let alpha = &h1.freqs;
        let k2 = freqs.len();
        let dim = k2 * fir_len;
        let lmax = self.max_lag() as i64;
        let span = l1 as i64 - 1;

        // Distinct differences beta_k - beta_k'.
        let mut gammas: Vec<f64> = Vec::new();
        let mut gamma_of = vec![0usize; k2 * k2];
        for k in 0..k2 {
            for kk in 0..k2 {
                let g = freqs[k] - freqs[kk];
                let idx = match gammas.iter().position(|x| (x - g).abs() < FREQ_TOL) {
                    Some(i) => i,
                    None => {
                        gammas.push(g);
                        gammas.len() - 1
                    }
                };
                gamma_of[k * k2 + kk] = idx;
            }
        }

        let tau_span = fir_len as i64 - 1;
        let phase: Vec<Vec<Complex64>> = alpha
            .iter()
            .map(|&am| (-(span + tau_span)..=span + tau_span).map(|lag| unit_phasor(am * lag as f64)).collect())
            .collect();
        let mut sums: Vec<Vec<Complex64>> = Vec::with_capacity(gammas.len());
        for &gamma in &gammas {
            let mut s_gamma = vec![Complex64::default(); (2 * tau_span + 1) as usize];
            let rot_gamma: Vec<Complex64> = (0..l1).map(|l| unit_phasor(gamma * l as f64)).collect();
            for m in 0..k1 {
                for mm in 0..k1 {
                    let Some(comp) = self.rr_component(gamma + alpha[m] - alpha[mm])? else { continue };
                    // R(s) = sum_{l' - l = s} a_m[l] conj(a_m'[l']) e^{-j2pi gamma l'}
                    let b: Vec<Complex64> = (0..l1).map(|l| a[mm][l].conj() * rot_gamma[l]).collect();
                    let mut r = vec![Complex64::default(); 2 * l1 - 1];
                    for (l, &am) in a[m].iter().enumerate() {
                        if am == Complex64::default() {
                            continue;
                        }
                        for (lp, &bv) in b.iter().enumerate() {
                            r[(lp as i64 - l as i64 + span) as usize] += am * bv;
                        }
                    }
                    // q[lag] = C^{gamma + alpha_m - alpha_m'}(lag) e^{-j2pi alpha_m lag}
                    let reach = span + tau_span;
                    let q: Vec<Complex64> = (-reach..=reach)
                        .map(|lag| comp[(lag + lmax) as usize] * phase[m][(lag + reach) as usize])
                        .collect();
                    let nonzero: Vec<(usize, Complex64)> =
                        r.iter().copied().enumerate().filter(|(_, v)| *v != Complex64::default()).collect();
                    for tau in -tau_span..=tau_span {
                        let mut acc = Complex64::default();
                        for &(si, rs) in &nonzero {
                            // lag = tau + s, s = si - span
                            acc += rs * q[(tau + si as i64 + tau_span) as usize];
                        }
                        s_gamma[(tau + tau_span) as usize] += acc;
                    }
                }
            }
            sums.push(s_gamma);
        }

        let mut c = HermitianMatrix::zeros(dim);
        for k in 0..k2 {
            for kk in 0..k2 {
                let s = &sums[gamma_of[k * k2 + kk]];
                for i in 0..fir_len {
                    for ii in 0..fir_len {
                        let tau = ii as i64 - i as i64;
                        let v = unit_phasor(freqs[k] * tau as f64) * s[(tau + tau_span) as usize];
                        c.set(k * fir_len + i, kk * fir_len + ii, v);
                    }
                }
            }
        }

        // c(k,i) = sum_m sum_l a_m[l] C_dd^{alpha_m + beta_k}(D-j) e^{j2pi(alpha_m (j-D) + beta_k (i-D))}
        // with j = i + l and D the total delay.
        let mut rhs = vec![Complex64::default(); dim];
        for (k, &beta) in freqs.iter().enumerate() {
            for m in 0..k1 {
                let Some(comp) = self.dd.component(alpha[m] + beta)? else { continue };
                let comp = comp.to_vec();
                for i in 0..fir_len {
                    let mut acc = Complex64::default();
                    for (l, &am) in a[m].iter().enumerate() {
                        if am == Complex64::default() {
                            continue;
                        }
                        let j = (i + l) as i64 - total_delay;
                        acc += am * comp[(lmax - j) as usize] * unit_phasor(-alpha[m] * j as f64);
                    }
                    rhs[k * fir_len + i] += acc * unit_phasor(-beta * (i as i64 - total_delay) as f64);
                }
            }
        }
        Ok((c, rhs))
    }

    /// Direct extraction of the desired signal from the received signal.
    pub fn design_direct(&mut self, shape: &FilterShape) -> Result<DirectDesign> {
        shape.validate("signal extractor")?;
        let c = self.correlation_matrix(&shape.freqs, shape.fir_len)?;
        let rhs = self.cross_vector(Target::Desired, &shape.freqs, shape.fir_len, shape.delay)?;
        let sol = solve_fresh_system(&c, &rhs, &shape.freqs, shape.fir_len)?;
        let filter = FreshFilterSpec::new(shape.freqs.clone(), shape.fir_len, sol.coeffs)?.with_delay(shape.delay)?;
        let ta_mse = (self.desired_power - sol.explained).max(0.0);
        Ok(DirectDesign { filter, ta_mse, desired_power: self.desired_power })
    }

    /// Stationary Wiener filter: the direct design with only the zero
    /// cyclic frequency.
    pub fn design_stationary_wiener(&mut self, fir_len: usize, delay: usize) -> Result<DirectDesign> {
        self.design_direct(&FilterShape::new(vec![0.0], fir_len, delay))
    }

    /// Noise estimator `h1` designed to recover the noise from the received
    /// signal, followed by `h2` designed for the cleaned signal.
    pub fn design_noise_canceller(&mut self, noise: &FilterShape, signal: &FilterShape) -> Result<TwoStageDesign> {
        noise.validate("noise estimator")?;
        signal.validate("signal extractor")?;
        let c1 = self.correlation_matrix(&noise.freqs, noise.fir_len)?;
        let rhs1 = self.cross_vector(Target::Noise, &noise.freqs, noise.fir_len, noise.delay)?;
        let sol1 = solve_fresh_system(&c1, &rhs1, &noise.freqs, noise.fir_len)?;
        let h1 = FreshFilterSpec::new(noise.freqs.clone(), noise.fir_len, sol1.coeffs)?.with_delay(noise.delay)?;
        let noise_mse = (self.noise_power() - sol1.explained).max(0.0);
        let (h2, ta_mse) = self.design_second_stage(&h1, signal)?;
        Ok(TwoStageDesign {
            receiver: TwoStageReceiver { h1, h2 },
            ta_mse,
            noise_estimate_mse: noise_mse,
            desired_power: self.desired_power,
        })
    }

    /// Optimal `h2` for a fixed `h1`, with its TA-MSE.
    pub fn design_second_stage(&mut self, h1: &FreshFilterSpec, signal: &FilterShape) -> Result<(FreshFilterSpec, f64)> {
        signal.validate("signal extractor")?;
        let (c2, rhs2) = self.second_stage_stats(h1, signal)?;
        let sol2 = solve_fresh_system(&c2, &rhs2, &signal.freqs, signal.fir_len)?;
        let h2 = FreshFilterSpec::new(signal.freqs.clone(), signal.fir_len, sol2.coeffs)?.with_delay(signal.delay)?;
        Ok((h2, (self.desired_power - sol2.explained).max(0.0)))
    }

    /// TA-MSE of an arbitrary single-stage filter applied to the received
    /// signal with the delayed desired signal as target.
    pub fn evaluate_direct(&mut self, filter: &FreshFilterSpec) -> Result<f64> {
        let c = self.correlation_matrix(&filter.freqs, filter.fir_len)?;
        let rhs = self.cross_vector(Target::Desired, &filter.freqs, filter.fir_len, filter.delay)?;
        Ok(quadratic_mse(self.desired_power, &c, &rhs, &filter.coeffs))
    }

    /// TA-MSE of an arbitrary two-stage receiver.
    pub fn evaluate_two_stage(&mut self, rx: &TwoStageReceiver) -> Result<f64> {
        let (c, rhs) = self.second_stage_stats(&rx.h1, &rx.h2.shape())?;
        Ok(quadratic_mse(self.desired_power, &c, &rhs, &rx.h2.coeffs))
    }

    /// Mean squared error of an arbitrary noise estimator.
    pub fn evaluate_noise_estimate(&mut self, h1: &FreshFilterSpec) -> Result<f64> {
        let c = self.correlation_matrix(&h1.freqs, h1.fir_len)?;
        let rhs = self.cross_vector(Target::Noise, &h1.freqs, h1.fir_len, h1.delay)?;
        Ok(quadratic_mse(self.noise_power(), &c, &rhs, &h1.coeffs))
    }
}

/// `power - 2 Re(h^H c) + h^H C h`.
pub fn quadratic_mse(power: f64, c: &HermitianMatrix, rhs: &[Complex64], h: &[Complex64]) -> f64 {
    let ch = c.mul_vec(h);
    let hch: f64 = h.iter().zip(&ch).map(|(a, b)| (a.conj() * b).re).sum();
    let hc: f64 = h.iter().zip(rhs).map(|(a, b)| (a.conj() * b).re).sum();
    power - 2.0 * hc + hch
}

/// `||C h - c|| / ||c||`: the time-averaged correlation between the
/// estimation error and the regressor, relative to the cross-correlation.
pub fn orthogonality_residual(c: &HermitianMatrix, rhs: &[Complex64], h: &[Complex64]) -> f64 {
    let ch = c.mul_vec(h);
    let num: f64 = ch.iter().zip(rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

#[derive(Debug, Clone)]
pub struct DirectDesign {
    pub filter: FreshFilterSpec,
    pub ta_mse: f64,
    pub desired_power: f64,
}

#[derive(Debug, Clone)]
pub struct TwoStageDesign {
    pub receiver: TwoStageReceiver,
    pub ta_mse: f64,
    pub noise_estimate_mse: f64,
    pub desired_power: f64,
}

/// Solution of a FRESH normal-equation system.
#[derive(Debug, Clone)]
pub struct FreshSolution {
    pub coeffs: Vec<Complex64>,
    /// `Re(h^H c)`, the part of the target power the filter explains.
    pub explained: f64,
}

/// Branch `pi(p)` whose frequency is `-alpha_p` modulo 1, for every branch.
pub fn conjugate_pairing(freqs: &[f64]) -> Option<Vec<usize>> {
    let pairing: Vec<usize> = freqs
        .iter()
        .map(|&a| freqs.iter().position(|&b| is_zero_freq(a + b)))
        .collect::<Option<_>>()?;
    pairing.iter().enumerate().all(|(p, &pp)| pairing[pp] == p).then_some(pairing)
}

/// Solves `C h = c`. When the regressor comes from a real input and the
/// frequency set is closed under negation, the system is carried to real
/// coordinates (`Re`/`Im` of each conjugate branch pair) and solved as a
/// real symmetric system of the same size.
pub fn solve_fresh_system(
    c: &HermitianMatrix,
    rhs: &[Complex64],
    freqs: &[f64],
    fir_len: usize,
) -> Result<FreshSolution> {
    if let Some(pairing) = conjugate_pairing(freqs) {
        if has_conjugate_symmetry(c, rhs, &pairing, fir_len) {
            return solve_real_structured(c, rhs, &pairing, fir_len);
        }
    }
    let coeffs = hermitian_solve(c, rhs, None)?;
    let explained = coeffs.iter().zip(rhs).map(|(a, b)| (a.conj() * b).re).sum();
    Ok(FreshSolution { coeffs, explained })
}

fn has_conjugate_symmetry(c: &HermitianMatrix, rhs: &[Complex64], pairing: &[usize], fir_len: usize) -> bool {
    let n = c.dim();
    let mirror = |u: usize| pairing[u / fir_len] * fir_len + u % fir_len;
    let scale = (0..n).map(|i| c.get(i, i).re.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let rscale = rhs.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if rhs.iter().enumerate().any(|(u, v)| (rhs[mirror(u)] - v.conj()).norm() > 1e-10 * rscale) {
        return false;
    }
    for u in 0..n {
        let mu = mirror(u);
        for v in 0..n {
            if (c.get(mu, mirror(v)) - c.get(u, v).conj()).norm() > 1e-10 * scale {
                return false;
            }
        }
    }
    true
}

/// Real coordinate attached to a complex regressor entry.
#[derive(Debug, Clone, Copy)]
enum RealCoord {
    /// Entry is itself real (branch at frequency 0 or 1/2).
    Own(usize),
    /// `sqrt 2 Re` of the entry.
    Re(usize),
    /// `sqrt 2 Im` of the entry.
    Im(usize),
}

fn real_coords(pairing: &[usize], fir_len: usize) -> Vec<RealCoord> {
    let mut out = Vec::with_capacity(pairing.len() * fir_len);
    for (p, &pp) in pairing.iter().enumerate() {
        if pp == p {
            out.extend((0..fir_len).map(|q| RealCoord::Own(p * fir_len + q)));
        } else if p < pp {
            out.extend((0..fir_len).map(|q| RealCoord::Re(p * fir_len + q)));
            out.extend((0..fir_len).map(|q| RealCoord::Im(p * fir_len + q)));
        }
    }
    out
}

fn solve_real_structured(
    c: &HermitianMatrix,
    rhs: &[Complex64],
    pairing: &[usize],
    fir_len: usize,
) -> Result<FreshSolution> {
    let n = c.dim();
    let mirror = |u: usize| pairing[u / fir_len] * fir_len + u % fir_len;
    let coords = real_coords(pairing, fir_len);
    let sqrt2 = 2.0f64.sqrt();
    // For z_u = A + jB and z_v = C + jD with S = E{z_u z_v} = C_{u, mirror(v)}:
    // E{AC} = Re(C+S)/2, E{BD} = Re(C-S)/2, E{AD} = Im(S-C)/2, E{BC} = Im(C+S)/2.
    let part = |a: RealCoord, b: RealCoord| -> f64 {
        let (u, su, ure) = match a {
            RealCoord::Own(u) => (u, 1.0, true),
            RealCoord::Re(u) => (u, sqrt2, true),
            RealCoord::Im(u) => (u, sqrt2, false),
        };
        let (v, sv, vre) = match b {
            RealCoord::Own(v) => (v, 1.0, true),
            RealCoord::Re(v) => (v, sqrt2, true),
            RealCoord::Im(v) => (v, sqrt2, false),
        };
        let cc = c.get(u, v);
        let ss = c.get(u, mirror(v));
        let e = match (ure, vre) {
            (true, true) => 0.5 * (cc + ss).re,
            (false, false) => 0.5 * (cc - ss).re,
            (true, false) => 0.5 * (ss - cc).im,
            (false, true) => 0.5 * (cc + ss).im,
        };
        su * sv * e
    };
    let mut g = SymmetricMatrix::zeros(n);
    for (i, &a) in coords.iter().enumerate() {
        for (j, &b) in coords.iter().enumerate().skip(i) {
            let v = part(a, b);
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    let gamma: Vec<f64> = coords
        .iter()
        .map(|&a| match a {
            RealCoord::Own(u) => rhs[u].re,
            RealCoord::Re(u) => sqrt2 * rhs[u].re,
            RealCoord::Im(u) => sqrt2 * rhs[u].im,
        })
        .collect();
    let x = symmetric_solve(&g, &gamma, None)?;
    let explained = x.iter().zip(&gamma).map(|(a, b)| a * b).sum();
    let mut coeffs = vec![Complex64::default(); n];
    for (&a, &v) in coords.iter().zip(&x) {
        match a {
            RealCoord::Own(u) => coeffs[u] = Complex64::new(v, 0.0),
            RealCoord::Re(u) => {
                coeffs[u].re = v / sqrt2;
                coeffs[mirror(u)].re = v / sqrt2;
            }
            RealCoord::Im(u) => {
                coeffs[u].im = v / sqrt2;
                coeffs[mirror(u)].im = -v / sqrt2;
            }
        }
    }
    Ok(FreshSolution { coeffs, explained })
}

/// Builds a context sized for the given receiver and designs it in one
/// call.
pub fn design_direct(inputs: &DesignInputs, shape: &FilterShape) -> Result<DirectDesign> {
    DesignContext::new(inputs, shape.fir_len.saturating_sub(1)).design_direct(shape)
}

pub fn design_stationary_wiener(inputs: &DesignInputs, fir_len: usize, delay: usize) -> Result<DirectDesign> {
    DesignContext::new(inputs, fir_len.saturating_sub(1)).design_stationary_wiener(fir_len, delay)
}

pub fn design_noise_canceller(
    inputs: &DesignInputs,
    noise: &FilterShape,
    signal: &FilterShape,
) -> Result<TwoStageDesign> {
    DesignContext::new(inputs, (noise.fir_len + signal.fir_len).saturating_sub(2)).design_noise_canceller(noise, signal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{lcm, SeededRng};
    use proptest::prelude::*;

    /// `x[n] = sum_k g[n mod P][k] e[n - k]` with white unit `e`.
    fn lptv_acf(period: usize, taps: usize, rng: &mut SeededRng) -> PeriodicAutocorrelation {
        let g: Vec<Vec<f64>> = (0..period).map(|_| rng.gaussian_vec(taps)).collect();
        PeriodicAutocorrelation::from_fn(period, taps, true, |n, l| {
            let a = &g[(n + l) % period];
            let b = &g[n];
            Complex64::new((0..taps - l).map(|k| a[k + l] * b[k]).sum(), 0.0)
        })
        .unwrap()
    }

    fn rr(inputs: &DesignInputs, gain: f64, n: i64, lag: i64) -> Complex64 {
        inputs.c_dd.get(n, lag).unwrap() + inputs.c_ww.get(n, lag).unwrap() * gain
    }

    /// Averaging period covering the processes and every frequency used.
    fn horizon(inputs: &DesignInputs, denoms: &[usize]) -> usize {
        denoms.iter().fold(inputs.period(), |a, &b| lcm(a, b))
    }

    fn brute_direct(
        inputs: &DesignInputs,
        gain: f64,
        freqs: &[f64],
        l: usize,
        delay: i64,
        avg: usize,
    ) -> (Vec<Vec<Complex64>>, Vec<Complex64>) {
        let dim = freqs.len() * l;
        let mut c = vec![vec![Complex64::default(); dim]; dim];
        let mut v = vec![Complex64::default(); dim];
        for n in 0..avg as i64 {
            for (p, &a) in freqs.iter().enumerate() {
                for q in 0..l as i64 {
                    let u = p * l + q as usize;
                    v[u] += inputs.c_dd.get(n - q, q - delay).unwrap() * unit_phasor(a * (n - q) as f64);
                    for (pp, &b) in freqs.iter().enumerate() {
                        for qq in 0..l as i64 {
                            let e = rr(inputs, gain, n - qq, qq - q)
                                * unit_phasor(a * (n - q) as f64 - b * (n - qq) as f64);
                            c[u][pp * l + qq as usize] += e;
                        }
                    }
                }
            }
        }
        let s = 1.0 / avg as f64;
        (c.into_iter().map(|r| r.into_iter().map(|x| x * s).collect()).collect(), v.into_iter().map(|x| x * s).collect())
    }

    fn random_inputs(seed: u64) -> DesignInputs {
        let mut rng = SeededRng::new(seed, 0);
        let d = lptv_acf(4, 3, &mut rng);
        let w = lptv_acf(6, 4, &mut rng);
        DesignInputs::new(d, w)
    }

    fn random_filter(freqs: Vec<f64>, l: usize, rng: &mut SeededRng) -> FreshFilterSpec {
        let n = freqs.len() * l;
        FreshFilterSpec::new(freqs, l, (0..n).map(|_| Complex64::new(rng.gaussian(), rng.gaussian())).collect()).unwrap()
    }

    #[test]
    fn direct_statistics_match_brute_force() {
        let inputs = random_inputs(1);
        let freqs = [-0.25, 0.0, 1.0 / 6.0, 0.5];
        let l = 5;
        let mut ctx = DesignContext::new(&inputs, 10);
        ctx.set_noise_gain(0.7);
        let c = ctx.correlation_matrix(&freqs, l).unwrap();
        for delay in [0, 2, 4] {
            let v = ctx.cross_vector(Target::Desired, &freqs, l, delay).unwrap();
            let (cb, vb) = brute_direct(&inputs, 0.7, &freqs, l, delay as i64, horizon(&inputs, &[4, 6, 2]));
            for i in 0..c.dim() {
                assert!((v[i] - vb[i]).norm() < 1e-12, "delay {delay} rhs {i}");
                for j in 0..c.dim() {
                    assert!((c.get(i, j) - cb[i][j]).norm() < 1e-12, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn second_stage_statistics_match_brute_force() {
        for (d1, d2) in [(0, 0), (1, 0), (2, 3)] {
            second_stage_case(d1, d2);
        }
    }

    fn second_stage_case(d1: usize, d2: usize) {
        let inputs = random_inputs(2);
        let mut rng = SeededRng::new(3, 0);
        let gain = 1.3;
        let h1 = random_filter(vec![-1.0 / 6.0, 0.0, 1.0 / 3.0], 3, &mut rng).with_delay(d1).unwrap();
        let beta = [-0.25, 0.0, 0.25];
        let l2 = 4;
        let mut ctx = DesignContext::new(&inputs, 8);
        ctx.set_noise_gain(gain);
        let (c, v) = ctx.second_stage_stats(&h1, &FilterShape::new(beta.to_vec(), l2, d2)).unwrap();
        let total = (d1 + d2) as i64;

        let avg = horizon(&inputs, &[6, 3, 4]) as i64;
        let dim = beta.len() * l2;
        let mut a = vec![vec![Complex64::default(); h1.fir_len]; h1.branches()];
        for (m, row) in a.iter_mut().enumerate() {
            for (l, x) in row.iter_mut().enumerate() {
                *x = -h1.coeff(m, l).conj();
            }
        }
        a[1][d1] += 1.0;
        // t[n - i] = sum_m sum_l a_m[l] r[n-i-l] e^{-j2pi alpha_m (n-i-l)}
        let terms = |n: i64, i: usize| -> Vec<(i64, Complex64)> {
            let mut out = Vec::new();
            for (m, row) in a.iter().enumerate() {
                for (l, &am) in row.iter().enumerate() {
                    let t = n - i as i64 - l as i64;
                    out.push((t, am * unit_phasor(h1.freqs[m] * t as f64)));
                }
            }
            out
        };
        let mut cb = vec![vec![Complex64::default(); dim]; dim];
        let mut vb = vec![Complex64::default(); dim];
        for n in 0..avg {
            for (k, &bk) in beta.iter().enumerate() {
                for i in 0..l2 {
                    let u = k * l2 + i;
                    let ti = terms(n, i);
                    let ph = unit_phasor(bk * (n - i as i64) as f64);
                    for &(t, coef) in &ti {
                        vb[u] += ph * coef * inputs.c_dd.get(t, n - total - t).unwrap();
                    }
                    for (kk, &bkk) in beta.iter().enumerate() {
                        for ii in 0..l2 {
                            let ph2 = unit_phasor(bkk * (n - ii as i64) as f64).conj();
                            let mut acc = Complex64::default();
                            for &(t, coef) in &ti {
                                for &(tt, coef2) in &terms(n, ii) {
                                    acc += coef * coef2.conj() * rr(&inputs, gain, tt, t - tt);
                                }
                            }
                            cb[u][kk * l2 + ii] += ph * ph2 * acc;
                        }
                    }
                }
            }
        }
        let s = 1.0 / avg as f64;
        for i in 0..dim {
            assert!((v[i] - vb[i] * s).norm() < 1e-11, "delays ({d1},{d2}) rhs {i}");
            for j in 0..dim {
                assert!((c.get(i, j) - cb[i][j] * s).norm() < 1e-11, "({i},{j})");
            }
        }
    }

    #[test]
    fn designed_mse_matches_evaluation() {
        let inputs = random_inputs(4);
        let mut ctx = DesignContext::new(&inputs, 12);
        let direct = ctx.design_direct(&FilterShape::new(vec![-0.25, 0.0, 0.25], 6, 2)).unwrap();
        assert!((ctx.evaluate_direct(&direct.filter).unwrap() - direct.ta_mse).abs() < 1e-10);
        let two = ctx
            .design_noise_canceller(
                &FilterShape::new(vec![-1.0 / 6.0, 0.0, 1.0 / 6.0], 5, 2),
                &FilterShape::new(vec![-0.25, 0.0, 0.25], 6, 3),
            )
            .unwrap();
        assert!((ctx.evaluate_two_stage(&two.receiver).unwrap() - two.ta_mse).abs() < 1e-10);
        assert!((ctx.evaluate_noise_estimate(&two.receiver.h1).unwrap() - two.noise_estimate_mse).abs() < 1e-10);
        // Optimal coefficients are conjugate symmetric, so outputs are real.
        let f = &two.receiver.h1;
        for q in 0..f.fir_len {
            assert!((f.coeff(0, q) - f.coeff(2, q).conj()).norm() < 1e-10);
            assert!(f.coeff(1, q).im.abs() < 1e-10);
        }
    }

    #[test]
    fn zero_noise_estimator_reduces_to_direct() {
        let inputs = random_inputs(5);
        let mut ctx = DesignContext::new(&inputs, 12);
        let beta = FilterShape::new(vec![-0.25, 0.0, 0.25], 6, 3);
        let direct = ctx.design_direct(&beta).unwrap();
        let h1 = FreshFilterSpec::zeros(vec![0.0], 3).unwrap();
        let (h2, mse) = ctx.design_second_stage(&h1, &beta).unwrap();
        assert!((mse - direct.ta_mse).abs() < 1e-10);
        for (a, b) in h2.coeffs.iter().zip(&direct.filter.coeffs) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn richer_filters_never_do_worse() {
        let inputs = random_inputs(6);
        let mut ctx = DesignContext::new(&inputs, 14);
        let beta = vec![-0.25, 0.0, 0.25];
        let wiener = ctx.design_stationary_wiener(6, 0).unwrap().ta_mse;
        let fresh = ctx.design_direct(&FilterShape::causal(beta.clone(), 6)).unwrap().ta_mse;
        let longer = ctx.design_direct(&FilterShape::causal(beta.clone(), 8)).unwrap().ta_mse;
        // Extra taps after the target sample can only help.
        let smoother = ctx.design_direct(&FilterShape::new(beta.clone(), 10, 2)).unwrap().ta_mse;
        let two = ctx
            .design_noise_canceller(
                &FilterShape::causal(vec![-1.0 / 6.0, 0.0, 1.0 / 6.0], 6),
                &FilterShape::causal(beta, 8),
            )
            .unwrap();
        assert!(fresh <= wiener + 1e-12);
        assert!(longer <= fresh + 1e-12);
        assert!(smoother <= longer + 1e-12);
        assert!(wiener <= ctx.desired_power());
        assert!(two.ta_mse <= ctx.desired_power());
    }

    #[test]
    fn errors() {
        let inputs = random_inputs(7);
        let mut ctx = DesignContext::new(&inputs, 4);
        assert!(matches!(ctx.design_direct(&FilterShape::causal(vec![0.25], 3)), Err(Error::Config(_))));
        assert!(matches!(ctx.design_direct(&FilterShape::causal(vec![0.0], 9)), Err(Error::LagOutOfRange { .. })));
        assert!(matches!(ctx.design_direct(&FilterShape::new(vec![0.0], 3, 3)), Err(Error::Config(_))));
        assert!(FreshFilterSpec::zeros(vec![0.0], 2).unwrap().with_delay(2).is_err());
        assert!(FreshFilterSpec::new(vec![0.0], 2, vec![Complex64::default(); 3]).is_err());
        assert!(FreshFilterSpec::new(vec![], 2, vec![]).is_err());
        assert!(FreshFilterSpec::new(vec![f64::NAN], 1, vec![Complex64::default()]).is_err());
    }

    #[test]
    fn symmetric_frequency_sets() {
        assert_eq!(symmetric_freqs(5, 4), vec![-0.5, -0.25, 0.0, 0.25, 0.5]);
        assert_eq!(symmetric_freqs(1, 7), vec![0.0]);
        let f = with_cyclic_freq_error(&[-0.01, 0.0, 0.01], 100, 0.1);
        assert_eq!(f[1], 0.0);
        assert!((f[2] - 1.0 / 110.0).abs() < 1e-15);
        assert_eq!(conjugate_pairing(&[-0.25, 0.0, 0.25, 0.5]), Some(vec![2, 1, 0, 3]));
        assert_eq!(conjugate_pairing(&[0.0, 0.1]), None);
        assert_eq!(conjugate_pairing(&[-0.5, 0.0, 0.5]), None);
    }

    #[test]
    fn real_structured_solve_matches_complex_solve() {
        let inputs = random_inputs(8);
        let freqs = [-0.25, 0.0, 0.25, 0.5];
        let mut ctx = DesignContext::new(&inputs, 8);
        let c = ctx.correlation_matrix(&freqs, 5).unwrap();
        let v = ctx.cross_vector(Target::Desired, &freqs, 5, 1).unwrap();
        let fast = solve_fresh_system(&c, &v, &freqs, 5).unwrap();
        let slow = hermitian_solve(&c, &v, None).unwrap();
        for (a, b) in fast.coeffs.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-9 * (1.0 + b.norm()));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn designs_satisfy_orthogonality(
            seed in any::<u64>(),
            gain in 0.05f64..20.0,
            l in 1usize..7,
            d1 in 0usize..7,
            d2 in 0usize..7,
        ) {
            let inputs = random_inputs(seed);
            let mut ctx = DesignContext::new(&inputs, 2 * l + 2);
            ctx.set_noise_gain(gain);
            let signal = FilterShape::new(vec![-0.25, 0.0, 0.25], l, d2 % l);
            let noise = FilterShape::new(vec![-1.0 / 6.0, 0.0, 1.0 / 6.0], l, d1 % l);
            let d = ctx.design_direct(&signal).unwrap();
            let c = ctx.correlation_matrix(&signal.freqs, l).unwrap();
            let v = ctx.cross_vector(Target::Desired, &signal.freqs, l, signal.delay).unwrap();
            prop_assert!(orthogonality_residual(&c, &v, &d.filter.coeffs) < 1e-8);
            let two = ctx.design_noise_canceller(&noise, &signal).unwrap();
            let (c2, v2) = ctx.second_stage_stats(&two.receiver.h1, &signal).unwrap();
            prop_assert!(orthogonality_residual(&c2, &v2, &two.receiver.h2.coeffs) < 1e-8);
        }
    }
}
