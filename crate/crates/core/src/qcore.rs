//! Two-qubit density matrices for one shared EPR pair.
//!
//! Basis order is `|00⟩, |01⟩, |10⟩, |11⟩`; the first tensor factor is the
//! sender's half, the second the receiver's half. All operations are pure and
//! return a new state.

use core::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::error::Error;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

type Mat4 = [[Complex64; 4]; 4];
type Mat2 = [[Complex64; 2]; 2];

/// Tolerance for Hermiticity and unit trace.
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Tolerance for the smallest eigenvalue.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Which half of the pair an operation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Half {
    Sender,
    Receiver,
}

/// Memory decoherence parameters in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    t1: f64,
    t2: f64,
    perfect: bool,
}

impl NoiseParams {
    /// Relaxation time `t1` and dephasing time `t2`, both in ns.
    ///
    /// Requires `t2 <= 2 * t1` so that the dephasing probability stays in
    /// `[0, 1/2]`.
    pub fn new(t1: f64, t2: f64) -> Result<Self, Error> {
        if !(t1 > 0.0 && t1.is_finite()) || !(t2 > 0.0 && t2.is_finite()) {
            return Err(Error::InvalidNoise { t1, t2 });
        }
        if t2 > 2.0 * t1 {
            return Err(Error::InvalidNoise { t1, t2 });
        }
        Ok(Self { t1, t2, perfect: false })
    }

    /// A memory that never decoheres.
    pub const fn perfect() -> Self {
        Self { t1: f64::INFINITY, t2: f64::INFINITY, perfect: true }
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    pub fn is_perfect(&self) -> bool {
        self.perfect
    }

    /// Amplitude-damping probability after `dt` ns.
    pub fn damping_probability(&self, dt: f64) -> f64 {
        if self.perfect {
            return 0.0;
        }
        -libm::expm1(-dt / self.t1)
    }

    /// Dephasing probability after `dt` ns, the part of the T2 decay not
    /// already explained by relaxation.
    pub fn dephasing_probability(&self, dt: f64) -> f64 {
        if self.perfect {
            return 0.0;
        }
        // exponent is <= 0 because t2 <= 2 t1
        let exponent = -dt / self.t2 + dt / (2.0 * self.t1);
        -0.5 * libm::expm1(exponent)
    }
}

/// A two-bit superdense symbol. The high bit selects `Z`, the low bit `X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(u8);

impl Symbol {
    pub const ALL: [Symbol; 4] = [Symbol(0), Symbol(1), Symbol(2), Symbol(3)];

    pub fn new(value: u8) -> Option<Self> {
        (value < 4).then_some(Self(value))
    }

    pub fn from_bits(high: bool, low: bool) -> Self {
        Self(((high as u8) << 1) | low as u8)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn high(self) -> bool {
        self.0 & 0b10 != 0
    }

    pub fn low(self) -> bool {
        self.0 & 0b01 != 0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02b}", self.0)
    }
}

/// Result of a Bell-basis measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellOutcome {
    /// Same order as [`QubitPairState::bell_probabilities`].
    pub const ALL: [BellOutcome; 4] =
        [BellOutcome::PhiPlus, BellOutcome::PhiMinus, BellOutcome::PsiPlus, BellOutcome::PsiMinus];

    /// Decoded symbol: `00 -> Φ⁺, 01 -> Ψ⁺, 10 -> Φ⁻, 11 -> Ψ⁻`.
    pub fn symbol(self) -> Symbol {
        match self {
            BellOutcome::PhiPlus => Symbol(0b00),
            BellOutcome::PsiPlus => Symbol(0b01),
            BellOutcome::PhiMinus => Symbol(0b10),
            BellOutcome::PsiMinus => Symbol(0b11),
        }
    }

    pub fn from_symbol(symbol: Symbol) -> Self {
        match symbol.0 {
            0b00 => BellOutcome::PhiPlus,
            0b01 => BellOutcome::PsiPlus,
            0b10 => BellOutcome::PhiMinus,
            _ => BellOutcome::PsiMinus,
        }
    }

    fn index(self) -> usize {
        match self {
            BellOutcome::PhiPlus => 0,
            BellOutcome::PhiMinus => 1,
            BellOutcome::PsiPlus => 2,
            BellOutcome::PsiMinus => 3,
        }
    }
}

/// Density matrix of one EPR pair.
#[derive(Clone, PartialEq)]
pub struct QubitPairState {
    m: Mat4,
}

impl fmt::Debug for QubitPairState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.m.iter()).finish()
    }
}

impl QubitPairState {
    /// `|Φ⁺⟩⟨Φ⁺|` with `|Φ⁺⟩ = (|00⟩ + |11⟩)/√2`.
    pub fn bell_pair() -> Self {
        let h = Complex64::new(0.5, 0.0);
        let mut m = [[ZERO; 4]; 4];
        m[0][0] = h;
        m[0][3] = h;
        m[3][0] = h;
        m[3][3] = h;
        Self { m }
    }

    /// `I/4`.
    pub fn maximally_mixed() -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Complex64::new(0.25, 0.0);
        }
        Self { m }
    }

    /// The product state `|b_s b_r⟩⟨b_s b_r|`.
    pub fn basis(index: usize) -> Self {
        assert!(index < 4, "basis index out of range");
        let mut m = [[ZERO; 4]; 4];
        m[index][index] = ONE;
        Self { m }
    }

    /// Validates a row-major matrix against the density-matrix invariants.
    pub fn from_matrix(m: [[Complex64; 4]; 4]) -> Result<Self, Error> {
        let state = Self { m };
        state.validate()?;
        Ok(state)
    }

    pub fn matrix(&self) -> &[[Complex64; 4]; 4] {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.m[i][i].re).sum()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max(libm::sqrt((self.m[i][j] - self.m[j][i].conj()).norm_sqr()));
            }
        }
        worst
    }

    /// Smallest eigenvalue, via Jacobi rotation on the real 8×8 embedding.
    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.m).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let defect = self.hermiticity_defect();
        if !(defect <= ALGEBRA_TOL) {
            return Err(Error::NotHermitian(defect));
        }
        let trace = self.trace();
        if !((trace - 1.0).abs() <= ALGEBRA_TOL) {
            return Err(Error::BadTrace(trace));
        }
        let min = self.min_eigenvalue();
        if !(min >= -POSITIVITY_TOL) {
            return Err(Error::NotPositive(min));
        }
        Ok(())
    }

    /// Amplitude damping followed by dephasing on one half for `dt` ns.
    pub fn apply_memory_noise(&self, half: Half, dt: f64, params: &NoiseParams) -> Result<Self, Error> {
        if !(dt >= 0.0) {
            return Err(Error::NegativeDuration(dt));
        }
        if params.perfect || dt == 0.0 {
            return Ok(self.clone());
        }
        let p1 = params.damping_probability(dt);
        let p2 = params.dephasing_probability(dt);

        let e0: Mat2 = [[ONE, ZERO], [ZERO, Complex64::new(libm::sqrt(1.0 - p1), 0.0)]];
        let e1: Mat2 = [[ZERO, Complex64::new(libm::sqrt(p1), 0.0)], [ZERO, ZERO]];
        let k0 = embed(&e0, half);
        let k1 = embed(&e1, half);
        let damped = add(&sandwich(&k0, &self.m), &sandwich(&k1, &self.m));

        let z = embed(&PAULI_Z, half);
        let flipped = sandwich(&z, &damped);
        let mut m = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = damped[i][j] * (1.0 - p2) + flipped[i][j] * p2;
            }
        }
        Ok(Self { m })
    }

    /// Applies the symbol's Pauli operator to the sender half:
    /// `00 -> I, 01 -> X, 10 -> Z, 11 -> X·Z`.
    pub fn superdense_encode(&self, symbol: Symbol) -> Self {
        let op = match symbol.0 {
            0b00 => return self.clone(),
            0b01 => PAULI_X,
            0b10 => PAULI_Z,
            _ => mul2(&PAULI_X, &PAULI_Z),
        };
        Self { m: sandwich(&embed(&op, Half::Sender), &self.m) }
    }

    /// `(p_Φ⁺, p_Φ⁻, p_Ψ⁺, p_Ψ⁻)`.
    pub fn bell_probabilities(&self) -> [f64; 4] {
        let m = &self.m;
        // ⟨β|ρ|β⟩ for real Bell vectors with entries ±1/√2 on two basis states.
        let pair = |a: usize, b: usize, sign: f64| -> f64 {
            0.5 * (m[a][a].re + m[b][b].re + sign * (m[a][b].re + m[b][a].re))
        };
        [pair(0, 3, 1.0), pair(0, 3, -1.0), pair(1, 2, 1.0), pair(1, 2, -1.0)]
    }

    pub fn fidelity_to_phi_plus(&self) -> f64 {
        self.bell_probabilities()[0]
    }

    /// Samples a Bell-basis measurement outcome.
    pub fn bell_measure_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BellOutcome {
        let mut probs = self.bell_probabilities();
        let mut total = 0.0;
        for p in probs.iter_mut() {
            *p = p.clamp(0.0, 1.0);
            total += *p;
        }
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (outcome, p) in BellOutcome::ALL.iter().zip(probs) {
            acc += p;
            if u < acc {
                return *outcome;
            }
        }
        // u landed on the upper edge; return the last outcome with mass
        BellOutcome::ALL
            .iter()
            .rev()
            .zip(probs.iter().rev())
            .find(|(_, p)| **p > 0.0)
            .map(|(o, _)| *o)
            .unwrap_or(BellOutcome::PhiPlus)
    }

    /// Probability of one Bell outcome.
    pub fn probability_of(&self, outcome: BellOutcome) -> f64 {
        self.bell_probabilities()[outcome.index()]
    }
}

/// Plain transmission of one bit: prepare `|b⟩`, send it over the noiseless
/// channel, measure in the computational basis.
pub fn classical_encode_measure<R: Rng + ?Sized>(bit: bool, rng: &mut R) -> bool {
    let excited_population: f64 = if bit { 1.0 } else { 0.0 };
    rng.random::<f64>() < excited_population
}

const PAULI_X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];
const PAULI_Z: Mat2 = [[ONE, ZERO], [ZERO, Complex64::new(-1.0, 0.0)]];

fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `op ⊗ I` or `I ⊗ op`.
fn embed(op: &Mat2, half: Half) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let (si, ri) = (i >> 1, i & 1);
            let (sj, rj) = (j >> 1, j & 1);
            out[i][j] = match half {
                Half::Sender if ri == rj => op[si][sj],
                Half::Receiver if si == sj => op[ri][rj],
                _ => ZERO,
            };
        }
    }
    out
}

/// `k ρ k†`.
fn sandwich(k: &Mat4, rho: &Mat4) -> Mat4 {
    let mut tmp = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = ZERO;
            for l in 0..4 {
                acc += k[i][l] * rho[l][j];
            }
            tmp[i][j] = acc;
        }
    }
    let mut out = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = ZERO;
            for l in 0..4 {
                acc += tmp[i][l] * k[j][l].conj();
            }
            out[i][j] = acc;
        }
    }
    out
}

fn add(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[i][j] + b[i][j];
        }
    }
    out
}

/// Eigenvalues of a 4×4 Hermitian matrix.
///
/// `H = A + iB` maps to the real symmetric `[[A, -B], [B, A]]`, whose spectrum
/// is that of `H` with every eigenvalue doubled.
fn hermitian_eigenvalues(h: &Mat4) -> [f64; 4] {
    const N: usize = 8;
    let mut a = [[0.0f64; N]; N];
    for i in 0..4 {
        for j in 0..4 {
            let re = 0.5 * (h[i][j].re + h[j][i].re);
            let im = 0.5 * (h[i][j].im - h[j][i].im);
            a[i][j] = re;
            a[i + 4][j + 4] = re;
            a[i][j + 4] = -im;
            a[i + 4][j] = im;
        }
    }

    for _sweep in 0..64 {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }

    let mut diag = [0.0f64; N];
    for (i, d) in diag.iter_mut().enumerate() {
        *d = a[i][i];
    }
    diag.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
    [diag[0], diag[2], diag[4], diag[6]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_state_eq(a: &QubitPairState, b: &QubitPairState, tol: f64) {
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (a.m[i][j] - b.m[i][j]).norm_sqr().sqrt() <= tol,
                    "entry ({i},{j}) differs: {} vs {}",
                    a.m[i][j],
                    b.m[i][j]
                );
            }
        }
    }

    #[test]
    fn bell_pair_entries() {
        let s = QubitPairState::bell_pair();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if (i == 0 || i == 3) && (j == 0 || j == 3) { 0.5 } else { 0.0 };
                assert_eq!(s.matrix()[i][j], Complex64::new(expected, 0.0));
            }
        }
        assert_eq!(s.fidelity_to_phi_plus(), 1.0);
        assert_eq!(s.bell_probabilities(), [1.0, 0.0, 0.0, 0.0]);
        s.validate().unwrap();
    }

    #[test]
    fn zero_duration_is_identity() {
        let params = NoiseParams::new(11.0, 10.0).unwrap();
        let s = QubitPairState::bell_pair();
        let out = s.apply_memory_noise(Half::Sender, 0.0, &params).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn negative_duration_rejected() {
        let params = NoiseParams::new(11.0, 10.0).unwrap();
        let err = QubitPairState::bell_pair().apply_memory_noise(Half::Receiver, -1.0, &params);
        assert!(matches!(err, Err(Error::NegativeDuration(_))));
    }

    #[test]
    fn damping_probability_value() {
        // 1 - exp(-10/11) to 15 digits
        let params = NoiseParams::new(11.0, 10.0).unwrap();
        assert_abs_diff_eq!(params.damping_probability(10.0), 0.597_109_678_470_867, epsilon = 1e-14);
    }

    #[test]
    fn full_relaxation_goes_to_ground() {
        let params = NoiseParams::new(11.0, 10.0).unwrap();
        let s = QubitPairState::bell_pair()
            .apply_memory_noise(Half::Sender, 1e5, &params)
            .unwrap()
            .apply_memory_noise(Half::Receiver, 1e5, &params)
            .unwrap();
        assert_state_eq(&s, &QubitPairState::basis(0), 1e-12);
        let p = s.bell_probabilities();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[3], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn perfect_memory_is_identity() {
        let s = QubitPairState::bell_pair().superdense_encode(Symbol(3));
        let out = s.apply_memory_noise(Half::Sender, 1e9, &NoiseParams::perfect()).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn invalid_noise_rejected() {
        assert!(NoiseParams::new(10.0, 30.0).is_err());
        assert!(NoiseParams::new(0.0, 0.0).is_err());
        assert!(NoiseParams::new(10.0, 20.0).is_ok());
    }

    #[test]
    fn encodings_hit_expected_bell_states() {
        let phi = QubitPairState::bell_pair();
        assert_eq!(phi.superdense_encode(Symbol(0)), phi);
        assert_eq!(phi.superdense_encode(Symbol(1)).bell_probabilities(), [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(phi.superdense_encode(Symbol(2)).bell_probabilities(), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(phi.superdense_encode(Symbol(3)).bell_probabilities(), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn mixed_and_ground_probabilities() {
        let p = QubitPairState::maximally_mixed().bell_probabilities();
        for v in p {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        }
        // ⟨Φ±|00⟩ = 1/√2, ⟨Ψ±|00⟩ = 0
        assert_eq!(QubitPairState::basis(0).bell_probabilities(), [0.5, 0.5, 0.0, 0.0]);
        assert_eq!(QubitPairState::basis(0).fidelity_to_phi_plus(), 0.5);
        assert_eq!(QubitPairState::maximally_mixed().fidelity_to_phi_plus(), 0.25);
    }

    #[test]
    fn perfect_round_trip_every_symbol() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for s in Symbol::ALL {
            let encoded = QubitPairState::bell_pair().superdense_encode(s);
            for _ in 0..100 {
                assert_eq!(encoded.bell_measure_sample(&mut rng).symbol(), s);
            }
        }
    }

    #[test]
    fn sampling_mixed_state_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 4];
        let n = 100_000;
        let mixed = QubitPairState::maximally_mixed();
        for _ in 0..n {
            counts[mixed.bell_measure_sample(&mut rng).index()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn outcome_symbol_bijection() {
        for s in Symbol::ALL {
            assert_eq!(BellOutcome::from_symbol(s).symbol(), s);
        }
    }

    #[test]
    fn classical_channel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(!classical_encode_measure(false, &mut rng));
        assert!(classical_encode_measure(true, &mut rng));
        let msg = [true, false, false, true];
        let out: [bool; 4] = core::array::from_fn(|i| classical_encode_measure(msg[i], &mut rng));
        assert_eq!(out, msg);
    }

    #[test]
    fn eigenvalues_of_known_states() {
        let mut ev = hermitian_eigenvalues(QubitPairState::bell_pair().matrix());
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(ev[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[3], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(QubitPairState::maximally_mixed().min_eigenvalue(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn from_matrix_rejects_bad_trace() {
        let mut m = *QubitPairState::bell_pair().matrix();
        m[0][0] = Complex64::new(1.0, 0.0);
        assert!(matches!(QubitPairState::from_matrix(m), Err(Error::BadTrace(_))));
    }

    #[test]
    fn from_matrix_rejects_negative_eigenvalue() {
        let mut m = [[ZERO; 4]; 4];
        m[0][0] = Complex64::new(1.2, 0.0);
        m[1][1] = Complex64::new(-0.2, 0.0);
        assert!(matches!(QubitPairState::from_matrix(m), Err(Error::NotPositive(_))));
    }

    fn random_state(entries: &[f64]) -> QubitPairState {
        let mut a = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let k = 2 * (4 * i + j);
                a[i][j] = Complex64::new(entries[k], entries[k + 1]);
            }
        }
        let mut m = [[ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = (0..4).map(|k| a[i][k] * a[j][k].conj()).sum();
            }
        }
        let tr: f64 = (0..4).map(|i| m[i][i].re).sum();
        for row in &mut m {
            for x in row.iter_mut() {
                *x /= tr;
            }
        }
        QubitPairState::from_matrix(m).expect("A A† is a valid state")
    }

    fn state() -> impl Strategy<Value = QubitPairState> {
        prop::collection::vec(-1.0f64..1.0, 32)
            .prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
            .prop_map(|v| random_state(&v))
    }

    fn noise() -> impl Strategy<Value = NoiseParams> {
        (1.0f64..5000.0, 0.01f64..=1.0).prop_map(|(t1, frac)| NoiseParams::new(t1, 2.0 * t1 * frac).unwrap())
    }

    fn half() -> impl Strategy<Value = Half> {
        prop_oneof![Just(Half::Sender), Just(Half::Receiver)]
    }

    fn nalgebra_min_eigenvalue(s: &QubitPairState) -> f64 {
        let m = nalgebra::Matrix4::from_fn(|i, j| s.m[i][j]);
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    proptest! {
        #[test]
        fn noise_preserves_trace(s in state(), p in noise(), h in half(), dt in 0.0f64..20_000.0) {
            let out = s.apply_memory_noise(h, dt, &p).unwrap();
            prop_assert!((out.trace() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn noise_is_a_semigroup(s in state(), p in noise(), h in half(), a in 0.0f64..5000.0, b in 0.0f64..5000.0) {
            let stepwise = s.apply_memory_noise(h, a, &p).unwrap().apply_memory_noise(h, b, &p).unwrap();
            let direct = s.apply_memory_noise(h, a + b, &p).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!((stepwise.m[i][j] - direct.m[i][j]).norm_sqr().sqrt() <= 1e-9);
                }
            }
        }

        #[test]
        fn noise_keeps_states_positive(s in state(), p in noise(), h in half(), dt in 0.0f64..20_000.0, sym in 0u8..4) {
            let out = s.apply_memory_noise(h, dt, &p).unwrap().superdense_encode(Symbol::ALL[sym as usize]);
            let reference = nalgebra_min_eigenvalue(&out);
            prop_assert!(reference >= -1e-10);
            prop_assert!((out.min_eigenvalue() - reference).abs() <= 1e-9);
        }

        #[test]
        fn bell_probabilities_normalized(s in state(), p in noise(), dt in 0.0f64..5000.0) {
            let out = s.apply_memory_noise(Half::Sender, dt, &p).unwrap();
            let probs = out.bell_probabilities();
            prop_assert!(probs.iter().all(|&x| x >= -1e-12));
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
