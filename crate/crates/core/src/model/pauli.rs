use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::Complex64;

pub const MAX_QUBITS: usize = 64;

/// Hermitian Pauli operator `sign * ⊗_k σ(x_k, z_k)` with `σ(1,1) = Y`.
///
/// Bit `k` of `x`/`z` refers to qubit `k`. In dense matrices qubit 0 is the
/// most significant bit of the basis index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    negative: bool,
}

fn mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Exponent `e` (mod 4) such that `σ(a) σ(b) = i^e σ(a ^ b)` for unsigned strings.
pub fn product_phase(ax: u64, az: u64, bx: u64, bz: u64) -> u32 {
    let a_x = ax & !az;
    let a_y = ax & az;
    let a_z = az & !ax;
    let b_x = bx & !bz;
    let b_y = bx & bz;
    let b_z = bz & !bx;
    let plus = (a_x & b_y) | (a_y & b_z) | (a_z & b_x);
    let minus = (a_x & b_z) | (a_y & b_x) | (a_z & b_y);
    (plus.count_ones() + 3 * minus.count_ones()) % 4
}

/// Symplectic form: true iff the two (unsigned) strings commute.
pub fn symplectic_commutes(ax: u64, az: u64, bx: u64, bz: u64) -> bool {
    ((ax & bz).count_ones() + (az & bx).count_ones()) % 2 == 0
}

impl PauliString {
    pub fn identity(n: usize) -> Result<Self> {
        Self::from_bits(n, 0, 0, false)
    }

    pub fn from_bits(n: usize, x: u64, z: u64, negative: bool) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::InvalidModel(format!(
                "Pauli string length {n} outside 1..={MAX_QUBITS}"
            )));
        }
        if (x | z) & !mask(n) != 0 {
            return Err(Error::InvalidModel("Pauli bits beyond string length".into()));
        }
        Ok(PauliString { n, x, z, negative })
    }

    /// Single-qubit Pauli `letter` on qubit `k` of an `n`-qubit register.
    pub fn single(n: usize, k: usize, letter: char) -> Result<Self> {
        if k >= n {
            return Err(Error::InvalidModel(format!("qubit {k} outside register of {n}")));
        }
        let (x, z) = letter_bits(letter)?;
        Self::from_bits(n, (x as u64) << k, (z as u64) << k, false)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }
    pub fn x_bits(&self) -> u64 {
        self.x
    }
    pub fn z_bits(&self) -> u64 {
        self.z
    }
    pub fn sign(&self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }
    pub fn is_negative(&self) -> bool {
        self.negative
    }
    pub fn support_mask(&self) -> u64 {
        self.x | self.z
    }
    pub fn weight(&self) -> u32 {
        self.support_mask().count_ones()
    }
    pub fn is_identity(&self) -> bool {
        self.support_mask() == 0
    }
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }
    pub fn negated(&self) -> Self {
        PauliString { negative: !self.negative, ..*self }
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        symplectic_commutes(self.x, self.z, other.x, other.z)
    }

    /// Product `self * other = i^k * result`; `k` is returned alongside.
    pub fn mul_phase(&self, other: &PauliString) -> (u32, PauliString) {
        let e = product_phase(self.x, self.z, other.x, other.z);
        let mut negative = self.negative ^ other.negative;
        let mut k = e;
        if k >= 2 {
            negative = !negative;
            k -= 2;
        }
        (
            k,
            PauliString { n: self.n.max(other.n), x: self.x ^ other.x, z: self.z ^ other.z, negative },
        )
    }

    /// Product of two commuting strings, which is again Hermitian.
    pub fn mul_commuting(&self, other: &PauliString) -> Result<PauliString> {
        let (k, p) = self.mul_phase(other);
        if k != 0 {
            return Err(Error::NonCommuting);
        }
        Ok(p)
    }

    /// Site indices touched when every site holds `m` consecutive qubits.
    pub fn site_support(&self, m: usize) -> Vec<usize> {
        let mut sites: Vec<usize> = Vec::new();
        let mut s = self.support_mask();
        while s != 0 {
            let k = s.trailing_zeros() as usize;
            let site = k / m;
            if sites.last() != Some(&site) {
                sites.push(site);
            }
            s &= s - 1;
        }
        sites
    }

    /// Sub-string on the given qubits, in the given order.
    pub fn restrict(&self, qubits: &[usize]) -> Result<PauliString> {
        let mut x = 0u64;
        let mut z = 0u64;
        for (j, &k) in qubits.iter().enumerate() {
            x |= ((self.x >> k) & 1) << j;
            z |= ((self.z >> k) & 1) << j;
        }
        PauliString::from_bits(qubits.len(), x, z, self.negative)
    }

    /// Embeds a string on `qubits.len()` qubits into an `n`-qubit register.
    pub fn embed(&self, n: usize, qubits: &[usize]) -> Result<PauliString> {
        let mut x = 0u64;
        let mut z = 0u64;
        for (j, &k) in qubits.iter().enumerate() {
            x |= ((self.x >> j) & 1) << k;
            z |= ((self.z >> j) & 1) << k;
        }
        PauliString::from_bits(n, x, z, self.negative)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n;
        let mut m = DMatrix::zeros(dim, dim);
        let ny = (self.x & self.z).count_ones();
        let base = Complex64::i().powu(ny) * self.sign();
        let xi = qubit_mask_to_index(self.x, self.n);
        let zi = qubit_mask_to_index(self.z, self.n);
        for j in 0..dim {
            let flips = ((j as u64) & zi).count_ones();
            let v = if flips % 2 == 0 { base } else { -base };
            m[((j as u64 ^ xi) as usize, j)] = v;
        }
        m
    }

    /// Sign of the diagonal entry for a basis state given as a qubit mask.
    pub fn diagonal_value(&self, qubit_bits: u64) -> f64 {
        debug_assert!(self.is_diagonal());
        let s = if (qubit_bits & self.z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        s * self.sign()
    }
}

/// Reverses qubit order so bit k (qubit k) lands at position n-1-k.
pub fn qubit_mask_to_index(mask: u64, n: usize) -> u64 {
    if n == 0 {
        return 0;
    }
    mask.reverse_bits() >> (64 - n)
}

pub fn letter_bits(c: char) -> Result<(bool, bool)> {
    match c {
        'I' | 'i' | '_' => Ok((false, false)),
        'X' | 'x' => Ok((true, false)),
        'Y' | 'y' => Ok((true, true)),
        'Z' | 'z' => Ok((false, true)),
        other => Err(Error::InvalidModel(format!("unknown Pauli letter {other:?}"))),
    }
}

impl std::str::FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let mut x = 0u64;
        let mut z = 0u64;
        let mut n = 0usize;
        for (k, c) in body.chars().enumerate() {
            if k >= MAX_QUBITS {
                return Err(Error::InvalidModel("Pauli string longer than 64".into()));
            }
            let (bx, bz) = letter_bits(c)?;
            x |= (bx as u64) << k;
            z |= (bz as u64) << k;
            n = k + 1;
        }
        PauliString::from_bits(n, x, z, negative)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negative {
            write!(f, "-")?;
        }
        for k in 0..self.n {
            let c = match ((self.x >> k) & 1, (self.z >> k) & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (1, 1) => 'Y',
                _ => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl serde::Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
