//! Exact diagonalization of small spin chains in symmetry sectors.
//!
//! Basis states are bitstrings with site 1 as the most significant bit and
//! a set bit meaning spin down. Sector bases list their bitstrings in
//! increasing integer order, so the zero-magnetization basis of `L = 10`
//! starts `|↑↑↑↑↑↓↓↓↓↓⟩, |↑↑↑↑↓↑↓↓↓↓⟩, …`.
//!
//! * XX: `H = J Σᵢ (σ⁺ᵢσ⁻ᵢ₊₁ + σ⁻ᵢσ⁺ᵢ₊₁)`, open boundary by default.
//! * TFIM: `H = −J Σᵢ ZᵢZᵢ₊₁ − h Σᵢ Xᵢ`, periodic by default. The even
//!   parity sector uses `(|r⟩ + |r̄⟩)/√2` with `r̄` the bitwise complement
//!   of a representative `r` whose site-1 bit is clear.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::numeric::CompensatedSum;
use crate::spectral::{suppression_factor, RodeoResult, SpectralFunction, TimeSchedule};
use crate::{domain, Error, Result};

/// Longest chain accepted.
pub const MAX_LENGTH: usize = 16;
/// Largest dense sector dimension accepted.
pub const MAX_SECTOR_DIM: usize = 4096;
/// Relative tolerance for the target manifold and symmetry checks.
pub const MANIFOLD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Xx,
    Tfim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    ZeroMagnetization,
    EvenParity,
    Full,
    /// Zero magnetization for XX (full for odd `L`), even parity for TFIM.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub model: Model,
    pub length: usize,
    pub coupling: f64,
    #[serde(default)]
    pub field: f64,
    pub boundary: Boundary,
    pub sector: Sector,
}

impl HamiltonianSpec {
    /// Open XX chain in the zero-magnetization sector.
    pub fn xx(length: usize, coupling: f64) -> Self {
        Self {
            model: Model::Xx,
            length,
            coupling,
            field: 0.0,
            boundary: Boundary::Open,
            sector: Sector::ZeroMagnetization,
        }
    }

    /// Periodic TFIM in the even-parity sector.
    pub fn tfim(length: usize, coupling: f64, field: f64) -> Self {
        Self {
            model: Model::Tfim,
            length,
            coupling,
            field,
            boundary: Boundary::Periodic,
            sector: Sector::EvenParity,
        }
    }

    pub fn with_sector(mut self, sector: Sector) -> Self {
        self.sector = sector;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    /// The sector actually used, with `Auto` resolved.
    pub fn resolved_sector(&self) -> Sector {
        match (self.sector, self.model) {
            (Sector::Auto, Model::Xx) if self.length.is_multiple_of(2) => Sector::ZeroMagnetization,
            (Sector::Auto, Model::Xx) => Sector::Full,
            (Sector::Auto, Model::Tfim) => Sector::EvenParity,
            (s, _) => s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.length;
        if l == 0 || l > MAX_LENGTH {
            return domain(format!("chain length must be in 1..={MAX_LENGTH}, got {l}"));
        }
        if !self.coupling.is_finite() || !self.field.is_finite() {
            return domain("coupling and field must be finite");
        }
        match (self.model, self.resolved_sector()) {
            (Model::Xx, Sector::EvenParity) => {
                return domain("even_parity sector applies to the TFIM only")
            }
            (Model::Tfim, Sector::ZeroMagnetization) => {
                return domain("zero_magnetization sector applies to the XX model only")
            }
            (_, Sector::ZeroMagnetization) if l % 2 == 1 => {
                return domain(format!("zero_magnetization needs even L, got {l}"))
            }
            _ => {}
        }
        let dim = sector_dimension(l, self.resolved_sector());
        if dim > MAX_SECTOR_DIM {
            return domain(format!(
                "sector dimension {dim} exceeds the dense limit {MAX_SECTOR_DIM}"
            ));
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn sector_dimension(length: usize, sector: Sector) -> usize {
    match sector {
        Sector::ZeroMagnetization => binomial(length, length / 2),
        Sector::EvenParity => 1 << (length - 1),
        Sector::Full | Sector::Auto => 1 << length,
    }
}

/// Ordered list of bitstrings spanning a sector. For the even-parity
/// sector each entry is the representative `r` of `(|r⟩ + |r̄⟩)/√2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    pub length: usize,
    pub sector: Sector,
    pub states: Vec<u32>,
}

impl SectorBasis {
    pub fn new(length: usize, sector: Sector) -> Self {
        let states = match sector {
            Sector::ZeroMagnetization => fixed_down_states(length, length / 2),
            Sector::EvenParity => (0..1u32 << (length - 1)).collect(),
            Sector::Full | Sector::Auto => (0..1u32 << length).collect(),
        };
        Self {
            length,
            sector,
            states,
        }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, state: u32) -> Option<usize> {
        self.states.binary_search(&state).ok()
    }

    /// Renders a basis state as arrows, site 1 first.
    pub fn ket(&self, index: usize) -> String {
        let s = self.states[index];
        (0..self.length)
            .map(|site| if s >> (self.length - 1 - site) & 1 == 1 { '↓' } else { '↑' })
            .collect()
    }
}

fn fixed_down_states(length: usize, n_down: usize) -> Vec<u32> {
    (0..1u32 << length)
        .filter(|s| s.count_ones() as usize == n_down)
        .collect()
}

fn bonds(length: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut b: Vec<(usize, usize)> = (0..length.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if boundary == Boundary::Periodic && length > 2 {
        b.push((length - 1, 0));
    }
    b
}

fn xx_matrix(length: usize, coupling: f64, boundary: Boundary, states: &[u32]) -> Result<DMatrix<f64>> {
    let dim = states.len();
    let mut h = DMatrix::zeros(dim, dim);
    let bonds = bonds(length, boundary);
    for (col, &s) in states.iter().enumerate() {
        for &(i, j) in &bonds {
            let (bi, bj) = (length - 1 - i, length - 1 - j);
            if (s >> bi & 1) != (s >> bj & 1) {
                let flipped = s ^ (1 << bi) ^ (1 << bj);
                let row = states.binary_search(&flipped).map_err(|_| {
                    Error::InvalidInput(format!("hopping left the sector from state {s:#b}"))
                })?;
                h[(row, col)] += coupling;
            }
        }
    }
    Ok(h)
}

fn tfim_diagonal(s: u32, coupling: f64, bonds: &[(usize, usize)], length: usize) -> f64 {
    bonds
        .iter()
        .map(|&(i, j)| {
            let aligned = (s >> (length - 1 - i) & 1) == (s >> (length - 1 - j) & 1);
            if aligned {
                -coupling
            } else {
                coupling
            }
        })
        .sum()
}

fn tfim_matrix(spec: &HamiltonianSpec, basis: &SectorBasis) -> DMatrix<f64> {
    let l = spec.length;
    let dim = basis.dim();
    let mut h = DMatrix::zeros(dim, dim);
    let bonds = bonds(l, spec.boundary);
    let top = 1u32 << (l - 1);
    let mask = (1u32 << l) - 1;
    for (col, &s) in basis.states.iter().enumerate() {
        h[(col, col)] = tfim_diagonal(s, spec.coupling, &bonds, l);
        for site in 0..l {
            let mut t = s ^ (1 << (l - 1 - site));
            if basis.sector == Sector::EvenParity && t & top != 0 {
                t ^= mask;
            }
            // Every representative lies in the basis by construction.
            let row = basis.index_of(t).expect("representative in basis");
            h[(row, col)] -= spec.field;
        }
    }
    h
}

/// Hamiltonian restricted to a sector, with its basis.
#[derive(Debug, Clone)]
pub struct SectorHamiltonian {
    pub spec: HamiltonianSpec,
    pub basis: SectorBasis,
    pub matrix: DMatrix<f64>,
}

/// Builds the Hamiltonian matrix in the requested sector basis.
pub fn build_sector_hamiltonian(spec: &HamiltonianSpec) -> Result<SectorHamiltonian> {
    spec.validate()?;
    let sector = spec.resolved_sector();
    let basis = SectorBasis::new(spec.length, sector);
    let matrix = match spec.model {
        Model::Xx => xx_matrix(spec.length, spec.coupling, spec.boundary, &basis.states)?,
        Model::Tfim => tfim_matrix(spec, &basis),
    };
    Ok(SectorHamiltonian {
        spec: *spec,
        basis,
        matrix,
    })
}

/// Full spectrum of a sector Hamiltonian.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub sector_dim: usize,
}

/// Dense symmetric eigendecomposition, eigenvalues ascending. Each
/// eigenvector's largest-magnitude component is made positive.
pub fn eigendecompose(h: &DMatrix<f64>) -> Result<EigenSystem> {
    if !h.is_square() {
        return Err(Error::InvalidInput(format!(
            "matrix is {}x{}, not square",
            h.nrows(),
            h.ncols()
        )));
    }
    let scale = h.amax().max(1.0);
    let asym = (h - h.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let n = h.nrows();
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok(EigenSystem {
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        eigenvectors: vectors,
        sector_dim: n,
    })
}

impl EigenSystem {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `max |E_k|`, the spectral norm of the matrix.
    pub fn norm(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(0.0f64, |m, e| m.max(e.abs()))
    }

    fn manifold_tolerance(&self) -> f64 {
        MANIFOLD_TOLERANCE * self.norm()
    }

    /// Indices of eigenvalues within `1e-10·‖H‖` of `target`.
    pub fn target_manifold(&self, target: f64) -> Vec<usize> {
        let tol = self.manifold_tolerance();
        (0..self.eigenvalues.len())
            .filter(|&k| (self.eigenvalues[k] - target).abs() <= tol)
            .collect()
    }

    /// Distance from the ground manifold to the next distinct level.
    pub fn gap(&self) -> Option<f64> {
        let e0 = self.ground_energy();
        let tol = self.manifold_tolerance();
        self.eigenvalues
            .iter()
            .find(|&&e| e - e0 > tol)
            .map(|e| e - e0)
    }

    /// `⟨E_k|ψ⟩` for every eigenvector.
    pub fn overlaps(&self, psi: &InitialState) -> Result<Vec<f64>> {
        if psi.vector.len() != self.sector_dim {
            return Err(Error::InvalidInput(format!(
                "state has dimension {}, sector has {}",
                psi.vector.len(),
                self.sector_dim
            )));
        }
        let c = self.eigenvectors.tr_mul(&psi.vector);
        Ok(c.iter().copied().collect())
    }

    /// Level weights `|⟨E_k|ψ⟩|²` relative to a target energy.
    pub fn overlap_spectrum(&self, psi: &InitialState, target: f64) -> Result<OverlapSpectrum> {
        let c = self.overlaps(psi)?;
        let manifold = self.target_manifold(target);
        let mut target_weight = CompensatedSum::new();
        let mut energies = Vec::new();
        let mut weights = Vec::new();
        for (k, ck) in c.iter().enumerate() {
            let w = ck * ck;
            if manifold.binary_search(&k).is_ok() {
                target_weight.add(w);
            } else {
                energies.push(self.eigenvalues[k]);
                weights.push(w);
            }
        }
        Ok(OverlapSpectrum {
            target,
            target_weight: target_weight.value(),
            energies,
            weights,
        })
    }
}

/// Initial-state overlaps split into the target manifold and the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSpectrum {
    pub target: f64,
    pub target_weight: f64,
    /// Non-target levels.
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
}

impl OverlapSpectrum {
    /// Surviving non-target weight after `sched`.
    pub fn zeta(&self, sched: &TimeSchedule) -> f64 {
        let mut acc = CompensatedSum::new();
        for (&e, &w) in self.energies.iter().zip(&self.weights) {
            acc.add(w * suppression_factor(e, self.target, sched.times()));
        }
        acc.value()
    }

    pub fn evaluate(&self, sched: &TimeSchedule) -> RodeoResult {
        RodeoResult::new(Some(self.target_weight), self.zeta(sched))
    }

    /// The same weights as a discrete spectral function, target levels
    /// placed exactly at the target energy.
    pub fn spectral_function(&self) -> SpectralFunction {
        let mut energies = vec![self.target];
        energies.extend(&self.energies);
        let mut weights = vec![self.target_weight];
        weights.extend(&self.weights);
        SpectralFunction::Discrete { energies, weights }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStateKind {
    /// A single sector basis vector.
    BasisIndex(usize),
    /// Product of ground states of the two half chains (XX only).
    Fusion,
    /// `|+⟩^⊗L` expressed in the sector basis (TFIM).
    PlusProjected,
    /// Amplitudes in the sector basis; normalized on construction.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub kind: InitialStateKind,
    pub vector: DVector<f64>,
}

/// Builds a normalized initial state in the sector basis of `ham`.
pub fn make_initial_state(ham: &SectorHamiltonian, kind: InitialStateKind) -> Result<InitialState> {
    let dim = ham.basis.dim();
    let vector = match &kind {
        InitialStateKind::BasisIndex(i) => {
            if *i >= dim {
                return domain(format!("basis index {i} out of range for dimension {dim}"));
            }
            let mut v = DVector::zeros(dim);
            v[*i] = 1.0;
            v
        }
        InitialStateKind::Fusion => fusion_state(ham)?,
        InitialStateKind::PlusProjected => plus_state(ham)?,
        InitialStateKind::Custom(amps) => {
            if amps.len() != dim {
                return domain(format!("custom state has {} amplitudes, need {dim}", amps.len()));
            }
            let v = DVector::from_column_slice(amps);
            let norm = v.norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return domain("custom state must have finite nonzero norm");
            }
            v / norm
        }
    };
    Ok(InitialState { kind, vector })
}

fn plus_state(ham: &SectorHamiltonian) -> Result<DVector<f64>> {
    let l = ham.spec.length as i32;
    let dim = ham.basis.dim();
    match ham.basis.sector {
        Sector::EvenParity => Ok(DVector::from_element(dim, 2f64.powf((1 - l) as f64 / 2.0))),
        Sector::Full => Ok(DVector::from_element(dim, 2f64.powf(-l as f64 / 2.0))),
        _ => domain("plus_projected needs the even_parity or full sector"),
    }
}

/// Ground state of an open XX block of `length` sites with `n_down` down
/// spins, on the block's own ordered basis.
fn xx_block_ground(length: usize, n_down: usize, coupling: f64, boundary: Boundary) -> Result<(Vec<u32>, DVector<f64>)> {
    let states = fixed_down_states(length, n_down);
    let h = xx_matrix(length, coupling, boundary, &states)?;
    let eig = eigendecompose(&h)?;
    Ok((states, eig.eigenvectors.column(0).into_owned()))
}

fn fusion_state(ham: &SectorHamiltonian) -> Result<DVector<f64>> {
    let spec = &ham.spec;
    if spec.model != Model::Xx {
        return domain("fusion state is defined for the XX model");
    }
    let l = spec.length;
    if l % 2 == 1 || l < 2 {
        return domain(format!("fusion needs an even chain length, got {l}"));
    }
    let half = l / 2;
    let total_down = match ham.basis.sector {
        Sector::ZeroMagnetization | Sector::Full => l / 2,
        _ => return domain("fusion needs the zero_magnetization or full sector"),
    };
    // For odd half chains the left block takes the extra up spin.
    let left_down = total_down / 2;
    let right_down = total_down - left_down;
    let (ls, lv) = xx_block_ground(half, left_down, spec.coupling, Boundary::Open)?;
    let (rs, rv) = xx_block_ground(half, right_down, spec.coupling, Boundary::Open)?;
    let mut v = DVector::zeros(ham.basis.dim());
    for (a, &left) in ls.iter().enumerate() {
        for (b, &right) in rs.iter().enumerate() {
            let s = (left << half) | right;
            let idx = ham
                .basis
                .index_of(s)
                .ok_or_else(|| Error::InvalidInput("fusion state left the sector".into()))?;
            v[idx] = lv[a] * rv[b];
        }
    }
    Ok(v)
}

/// Runs a schedule on `psi` and reports `ζ`, success probability and
/// fidelity against the manifold at `target`.
pub fn ra_fidelity(eig: &EigenSystem, psi: &InitialState, target: f64, sched: &TimeSchedule) -> Result<RodeoResult> {
    Ok(eig.overlap_spectrum(psi, target)?.evaluate(sched))
}

/// Applies the parity operator `∏ᵢ Xᵢ` to a full-basis vector.
pub fn apply_parity_full(length: usize, v: &DVector<f64>) -> DVector<f64> {
    let mask = (1usize << length) - 1;
    DVector::from_fn(v.len(), |i, _| v[i ^ mask])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn xx10() -> (SectorHamiltonian, EigenSystem) {
        let ham = build_sector_hamiltonian(&HamiltonianSpec::xx(10, 1.0)).unwrap();
        let eig = eigendecompose(&ham.matrix).unwrap();
        (ham, eig)
    }

    /// Lowest eigenvalue by Lanczos with full reorthogonalization followed
    /// by Sturm-sequence bisection on the tridiagonal matrix.
    fn lanczos_ground(h: &DMatrix<f64>) -> f64 {
        let n = h.nrows();
        let mut q: Vec<DVector<f64>> = Vec::new();
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.01 * ((i * 7919) % 101) as f64);
        v /= v.norm();
        for _ in 0..n {
            let mut w = h * &v;
            let a = v.dot(&w);
            alpha.push(a);
            q.push(v.clone());
            for _ in 0..2 {
                for qi in &q {
                    let c = qi.dot(&w);
                    w -= qi * c;
                }
            }
            let b = w.norm();
            if b < 1e-12 {
                break;
            }
            beta.push(b);
            v = w / b;
        }
        let m = alpha.len();
        let count_below = |x: f64| {
            let mut count = 0;
            let mut d = alpha[0] - x;
            if d < 0.0 {
                count += 1;
            }
            for k in 1..m {
                let denom = if d == 0.0 { 1e-300 } else { d };
                d = alpha[k] - x - beta[k - 1] * beta[k - 1] / denom;
                if d < 0.0 {
                    count += 1;
                }
            }
            count
        };
        let bound = h.abs().row_sum().max() + 1.0;
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn xx_two_sites() {
        let ham = build_sector_hamiltonian(&HamiltonianSpec::xx(2, 1.0)).unwrap();
        assert_eq!(ham.matrix, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let eig = eigendecompose(&ham.matrix).unwrap();
        assert_relative_eq!(eig.eigenvalues[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(eig.eigenvalues[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sector_dimensions() {
        assert_eq!(build_sector_hamiltonian(&HamiltonianSpec::xx(10, 1.0)).unwrap().basis.dim(), 252);
        assert_eq!(build_sector_hamiltonian(&HamiltonianSpec::tfim(10, 1.0, 1.0)).unwrap().basis.dim(), 512);
        assert!(build_sector_hamiltonian(&HamiltonianSpec::xx(9, 1.0)).is_err());
        assert!(build_sector_hamiltonian(&HamiltonianSpec::xx(17, 1.0)).is_err());
        assert!(build_sector_hamiltonian(&HamiltonianSpec::tfim(14, 1.0, 1.0).with_sector(Sector::Full)).is_err());
    }

    #[test]
    fn basis_order_and_second_vector() {
        let (ham, _) = xx10();
        assert_eq!(ham.basis.ket(0), "↑↑↑↑↑↓↓↓↓↓");
        assert_eq!(ham.basis.ket(1), "↑↑↑↑↓↑↓↓↓↓");
    }

    #[test]
    fn eigendecompose_examples() {
        let eig = eigendecompose(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(eig.eigenvalues.len(), 2);
        assert_relative_eq!(eig.eigenvalues[0], -1.0, epsilon = 1e-15);
        assert!(eigendecompose(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0])).is_err());
    }

    #[test]
    fn xx_ground_energy_matches_lanczos() {
        let (ham, eig) = xx10();
        let oracle = lanczos_ground(&ham.matrix);
        assert!((eig.ground_energy() - oracle).abs() < 1e-10, "{} vs {oracle}", eig.ground_energy());
        // Free-fermion value: 2 Σ_{k=1}^{5} cos(kπ/11).
        let ff: f64 = (1..=5).map(|k| 2.0 * (k as f64 * std::f64::consts::PI / 11.0).cos()).sum();
        assert!((eig.ground_energy() + ff).abs() < 1e-10);
    }

    #[test]
    fn eigenpairs_are_accurate() {
        let (ham, eig) = xx10();
        let norm = eig.norm();
        for k in 0..eig.sector_dim {
            let v = eig.eigenvectors.column(k);
            let r = (&ham.matrix * v - v * eig.eigenvalues[k]).norm();
            assert!(r < 1e-10 * norm);
        }
        let gram = eig.eigenvectors.tr_mul(&eig.eigenvectors);
        assert!((gram - DMatrix::identity(252, 252)).amax() < 1e-10);
        assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn xx_spectrum_is_particle_hole_symmetric() {
        let (_, eig) = xx10();
        let n = eig.eigenvalues.len();
        for k in 0..n {
            assert!((eig.eigenvalues[k] + eig.eigenvalues[n - 1 - k]).abs() < 1e-10);
        }
    }

    #[test]
    fn xx_conserves_magnetization() {
        let ham = build_sector_hamiltonian(&HamiltonianSpec::xx(8, 1.0).with_sector(Sector::Full)).unwrap();
        for (r, &a) in ham.basis.states.iter().enumerate() {
            for (c, &b) in ham.basis.states.iter().enumerate() {
                if a.count_ones() != b.count_ones() {
                    assert_eq!(ham.matrix[(r, c)], 0.0);
                }
            }
        }
    }

    #[test]
    fn tfim_commutes_with_parity() {
        for l in 2..=8 {
            let ham = build_sector_hamiltonian(&HamiltonianSpec::tfim(l, 1.0, 0.7).with_sector(Sector::Full)).unwrap();
            let dim = 1usize << l;
            let p = DMatrix::from_fn(dim, dim, |r, c| if r == c ^ (dim - 1) { 1.0 } else { 0.0 });
            let comm = &ham.matrix * &p - &p * &ham.matrix;
            assert!(comm.norm() < 1e-12);
        }
    }

    #[test]
    fn tfim_even_sector_matches_full_spectrum() {
        let spec = HamiltonianSpec::tfim(6, 1.0, 1.3);
        let even = eigendecompose(&build_sector_hamiltonian(&spec).unwrap().matrix).unwrap();
        let full_ham = build_sector_hamiltonian(&spec.with_sector(Sector::Full)).unwrap();
        let full = eigendecompose(&full_ham.matrix).unwrap();
        // Even-parity levels are those whose eigenvector is parity-even.
        let mut from_full: Vec<f64> = (0..full.sector_dim)
            .filter(|&k| {
                let v = full.eigenvectors.column(k).into_owned();
                (apply_parity_full(6, &v) - &v).norm() < 1e-8
            })
            .map(|k| full.eigenvalues[k])
            .collect();
        from_full.sort_by(f64::total_cmp);
        assert_eq!(from_full.len(), 32);
        for (a, b) in from_full.iter().zip(&even.eigenvalues) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn tfim_critical_gap_is_finite() {
        let ham = build_sector_hamiltonian(&HamiltonianSpec::tfim(10, 1.0, 1.0)).unwrap();
        let eig = eigendecompose(&ham.matrix).unwrap();
        assert!(eig.gap().unwrap() > 0.1);
    }

    #[test]
    fn e1_overlap() {
        let (ham, eig) = xx10();
        let psi = make_initial_state(&ham, InitialStateKind::BasisIndex(1)).unwrap();
        let r = ra_fidelity(&eig, &psi, eig.ground_energy(), &TimeSchedule::empty()).unwrap();
        let f = r.fidelity.unwrap();
        assert!((5e-8..9e-8).contains(&f), "{f}");
    }

    #[test]
    fn fusion_state_is_in_sector_and_normalized() {
        let ham = build_sector_hamiltonian(&HamiltonianSpec::xx(10, 1.0).with_sector(Sector::Full)).unwrap();
        let psi = make_initial_state(&ham, InitialStateKind::Fusion).unwrap();
        assert_relative_eq!(psi.vector.norm(), 1.0, epsilon = 1e-12);
        for (i, &s) in ham.basis.states.iter().enumerate() {
            if s.count_ones() != 5 {
                assert_eq!(psi.vector[i], 0.0);
            }
        }
        assert!(make_initial_state(&build_sector_hamiltonian(&HamiltonianSpec::xx(10, 1.0).with_sector(Sector::Full)).unwrap(), InitialStateKind::Fusion).is_ok());
        let odd = build_sector_hamiltonian(&HamiltonianSpec::xx(9, 1.0).with_sector(Sector::Full)).unwrap();
        assert!(make_initial_state(&odd, InitialStateKind::Fusion).is_err());
    }

    #[test]
    fn plus_state_is_parity_even() {
        let ham = build_sector_hamiltonian(&HamiltonianSpec::tfim(6, 1.0, 2.0).with_sector(Sector::Full)).unwrap();
        let psi = make_initial_state(&ham, InitialStateKind::PlusProjected).unwrap();
        assert_eq!(apply_parity_full(6, &psi.vector), psi.vector);
        let even = build_sector_hamiltonian(&HamiltonianSpec::tfim(6, 1.0, 2.0)).unwrap();
        let psi = make_initial_state(&even, InitialStateKind::PlusProjected).unwrap();
        assert_relative_eq!(psi.vector.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ground_state_has_unit_fidelity() {
        let (ham, eig) = xx10();
        let psi = make_initial_state(&ham, InitialStateKind::Custom(eig.eigenvectors.column(0).iter().copied().collect())).unwrap();
        let sched = TimeSchedule::new(vec![1.0, 2.5, 0.3]).unwrap();
        let r = ra_fidelity(&eig, &psi, eig.ground_energy(), &sched).unwrap();
        assert!((r.fidelity.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.zeta < 1e-20);
    }

    #[test]
    fn two_level_perfect_suppression() {
        let d = 0.8;
        let eig = eigendecompose(&DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, d])).unwrap();
        let ham = SectorHamiltonian {
            spec: HamiltonianSpec::xx(2, 1.0),
            basis: SectorBasis::new(2, Sector::ZeroMagnetization),
            matrix: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, d]),
        };
        let psi = make_initial_state(&ham, InitialStateKind::Custom(vec![0.6, 0.8])).unwrap();
        let sched = TimeSchedule::new(vec![std::f64::consts::PI / d]).unwrap();
        let r = ra_fidelity(&eig, &psi, 0.0, &sched).unwrap();
        assert!((r.fidelity.unwrap() - 1.0).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn fidelity_nondecreasing_when_appending(times in prop::collection::vec(0.0f64..20.0, 0..8), extra in 0.0f64..20.0) {
            let ham = build_sector_hamiltonian(&HamiltonianSpec::xx(6, 1.0)).unwrap();
            let eig = eigendecompose(&ham.matrix).unwrap();
            let psi = make_initial_state(&ham, InitialStateKind::BasisIndex(1)).unwrap();
            let s = TimeSchedule::new(times).unwrap();
            let e0 = eig.ground_energy();
            let before = ra_fidelity(&eig, &psi, e0, &s).unwrap();
            let after = ra_fidelity(&eig, &psi, e0, &s.appended(extra).unwrap()).unwrap();
            prop_assert!(after.fidelity.unwrap() >= before.fidelity.unwrap() * (1.0 - 1e-12));
        }
    }
}
