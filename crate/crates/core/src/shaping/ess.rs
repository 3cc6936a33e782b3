//! Enumerative sphere shaping.
//!
//! The trellis counts, for every prefix state, how many amplitude suffixes
//! keep the block energy `Σ a_i²` within `E_max`. Encoding maps an index to
//! the index-th admissible sequence in lexicographic order (smaller amplitude
//! first); decoding inverts it. Counts are arbitrary precision, so both
//! directions are bit-exact at any block length.
//!
//! States are indexed by consumed energy on the lattice
//! `u = l·a₀² + g·k`, where `a₀` is the smallest amplitude and `g` the gcd of
//! all `a² - a₀²` (8 for odd amplitudes), which keeps the table small.

use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

use crate::{Error, Result};

#[derive(Debug)]
pub struct EssCode {
    alphabet: Vec<u32>,
    block_length: usize,
    max_energy: u64,
    min_sq: u64,
    lattice_step: u64,
    /// `(a² - a₀²) / g` per alphabet entry, ascending.
    deltas: Vec<usize>,
    /// Number of feasible lattice states per level.
    width: usize,
    /// `trellis[l][k]`: admissible suffixes from level `l` with energy index `k`.
    trellis: Vec<Vec<BigUint>>,
    input_bits: u64,
    marginal: OnceLock<Vec<f64>>,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `a / b` as f64 for big integers of any size.
fn ratio(a: &BigUint, b: &BigUint) -> f64 {
    let shift = b.bits().saturating_sub(900);
    let a = (a >> shift).to_f64().unwrap_or(f64::INFINITY);
    let b = (b >> shift).to_f64().unwrap_or(f64::INFINITY);
    a / b
}

impl EssCode {
    /// Builds the trellis for `alphabet`, block length `block_length` and energy bound `max_energy`.
    pub fn new(alphabet: &[u32], block_length: usize, max_energy: u64) -> Result<Self> {
        let mut alphabet = alphabet.to_vec();
        alphabet.sort_unstable();
        alphabet.dedup();
        if alphabet.is_empty() || alphabet[0] == 0 {
            return Err(Error::Config("ESS alphabet must hold positive amplitudes".into()));
        }
        if block_length == 0 {
            return Err(Error::Config("ESS block length must be >= 1".into()));
        }
        let min_sq = (alphabet[0] as u64).pow(2);
        let floor = block_length as u64 * min_sq;
        if max_energy < floor {
            return Err(Error::Infeasible(format!(
                "E_max = {max_energy} is below the minimum block energy {floor}"
            )));
        }
        let step = alphabet
            .iter()
            .map(|a| (*a as u64).pow(2) - min_sq)
            .fold(0, gcd)
            .max(1);
        let deltas: Vec<usize> = alphabet
            .iter()
            .map(|a| (((*a as u64).pow(2) - min_sq) / step) as usize)
            .collect();
        let width = ((max_energy - floor) / step) as usize + 1;

        let mut trellis = vec![Vec::new(); block_length + 1];
        trellis[block_length] = vec![BigUint::one(); width];
        for l in (0..block_length).rev() {
            let next = &trellis[l + 1];
            let row: Vec<BigUint> = (0..width)
                .map(|k| {
                    let mut acc = BigUint::zero();
                    for d in &deltas {
                        match next.get(k + d) {
                            Some(c) => acc += c,
                            None => break,
                        }
                    }
                    acc
                })
                .collect();
            trellis[l] = row;
        }
        let input_bits = trellis[0][0].bits() - 1;
        Ok(EssCode {
            alphabet,
            block_length,
            max_energy,
            min_sq,
            lattice_step: step,
            deltas,
            width,
            trellis,
            input_bits,
            marginal: OnceLock::new(),
        })
    }

    /// Smallest lattice energy bound whose rate `k / L` reaches `bits_per_amplitude`.
    pub fn for_rate(alphabet: &[u32], block_length: usize, bits_per_amplitude: f64) -> Result<Self> {
        let max_a = *alphabet
            .iter()
            .max()
            .ok_or_else(|| Error::Config("empty ESS alphabet".into()))? as u64;
        let min_a = *alphabet.iter().min().unwrap() as u64;
        let needed = (bits_per_amplitude * block_length as f64 - 1e-9).ceil().max(0.0) as u64;
        let floor = block_length as u64 * min_a * min_a;
        let probe = Self::new(alphabet, block_length, floor)?;
        let step = probe.lattice_step;
        let top = (block_length as u64 * max_a * max_a - floor) / step;
        let full = Self::new(alphabet, block_length, floor + top * step)?;
        if full.input_bits < needed {
            return Err(Error::Infeasible(format!(
                "rate {bits_per_amplitude} bits/amplitude exceeds the unconstrained rate"
            )));
        }
        if probe.input_bits >= needed {
            return Ok(probe);
        }
        let (mut lo, mut hi) = (0u64, top);
        let mut best = full;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let code = Self::new(alphabet, block_length, floor + mid * step)?;
            if code.input_bits >= needed {
                hi = mid;
                best = code;
            } else {
                lo = mid;
            }
        }
        Ok(best)
    }

    pub fn alphabet(&self) -> &[u32] {
        &self.alphabet
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn max_energy(&self) -> u64 {
        self.max_energy
    }

    /// Number of admissible sequences `T(E_max, 0)`.
    pub fn num_sequences(&self) -> &BigUint {
        &self.trellis[0][0]
    }

    /// Input bits per block, `floor(log2 T(E_max, 0))`.
    pub fn input_bits(&self) -> u64 {
        self.input_bits
    }

    /// Amplitude bits per amplitude.
    pub fn rate(&self) -> f64 {
        self.input_bits as f64 / self.block_length as f64
    }

    /// `T(remaining, level)`: suffixes of length `L - level` with energy at
    /// most `remaining`. `None` when the state lies outside this code's table
    /// (a budget larger than any prefix of this code can leave).
    pub fn count(&self, level: usize, remaining: u64) -> Option<BigUint> {
        if level > self.block_length {
            return None;
        }
        let suffix_floor = (self.block_length - level) as u64 * self.min_sq;
        if remaining < suffix_floor {
            return Some(BigUint::zero());
        }
        let top = (self.width - 1) as u64;
        let j = (remaining - suffix_floor) / self.lattice_step;
        let k = top.checked_sub(j)?;
        Some(self.trellis[level][k as usize].clone())
    }

    fn check_index(&self, index: &BigUint) -> Result<()> {
        if index.bits() > self.input_bits {
            return Err(Error::InvalidCodeword(format!(
                "index needs {} bits, code takes {}",
                index.bits(),
                self.input_bits
            )));
        }
        Ok(())
    }

    /// Lexicographic walk to sequence `index`; `index < T(E_max, 0)` is assumed.
    fn walk(&self, index: &BigUint, mut visit: impl FnMut(usize, usize, Option<usize>)) -> Vec<u32> {
        let mut rest = index.clone();
        let mut k = 0usize;
        let mut out = Vec::with_capacity(self.block_length);
        for l in 0..self.block_length {
            let next = &self.trellis[l + 1];
            let mut chosen = None;
            for (j, d) in self.deltas.iter().enumerate() {
                let Some(c) = next.get(k + d) else { break };
                if &rest < c {
                    chosen = Some(j);
                    break;
                }
                rest -= c;
                // the whole subtree below choice j precedes `index`
                visit(l, j, Some(k + d));
            }
            let j = chosen.expect("index below the trellis count always finds a branch");
            k += self.deltas[j];
            out.push(self.alphabet[j]);
        }
        out
    }

    /// Amplitude sequence for `index < 2^k`.
    pub fn encode(&self, index: &BigUint) -> Result<Vec<u32>> {
        self.check_index(index)?;
        Ok(self.walk(index, |_, _, _| {}))
    }

    /// Amplitude sequence for `input_bits()` bits, most significant first.
    pub fn encode_bits(&self, bits: &[bool]) -> Result<Vec<u32>> {
        if bits.len() as u64 != self.input_bits {
            return Err(Error::LengthMismatch {
                expected: self.input_bits as usize,
                got: bits.len(),
            });
        }
        self.encode(&index_from_bits(bits))
    }

    pub fn decode(&self, amplitudes: &[u32]) -> Result<BigUint> {
        if amplitudes.len() != self.block_length {
            return Err(Error::LengthMismatch {
                expected: self.block_length,
                got: amplitudes.len(),
            });
        }
        let energy: u64 = amplitudes.iter().map(|a| (*a as u64).pow(2)).sum();
        if energy > self.max_energy {
            return Err(Error::InvalidCodeword(format!(
                "energy {energy} exceeds E_max = {}",
                self.max_energy
            )));
        }
        let mut index = BigUint::zero();
        let mut k = 0usize;
        for (l, a) in amplitudes.iter().enumerate() {
            let j = self
                .alphabet
                .binary_search(a)
                .map_err(|_| Error::InvalidCodeword(format!("amplitude {a} not in the alphabet")))?;
            let next = &self.trellis[l + 1];
            for d in &self.deltas[..j] {
                index += &next[k + d];
            }
            k += self.deltas[j];
        }
        self.check_index(&index)?;
        Ok(index)
    }

    pub fn decode_bits(&self, amplitudes: &[u32]) -> Result<Vec<bool>> {
        let index = self.decode(amplitudes)?;
        Ok(bits_from_index(&index, self.input_bits as usize))
    }

    /// Uniformly random `k`-bit input index.
    pub fn random_index(&self, rng: &mut dyn RngCore) -> BigUint {
        let words = self.input_bits.div_ceil(32) as usize;
        let mut digits: Vec<u32> = (0..words).map(|_| rng.next_u32()).collect();
        let spare = (words as u64 * 32 - self.input_bits) as u32;
        if let Some(top) = digits.last_mut() {
            if spare == 32 {
                *top = 0;
            } else {
                *top >>= spare;
            }
        }
        BigUint::new(digits)
    }

    /// Marginal amplitude distribution (ascending alphabet order) over the
    /// `2^k` addressed sequences, each used equally often.
    pub fn amplitude_distribution(&self) -> &[f64] {
        self.marginal.get_or_init(|| self.compute_marginal())
    }

    /// Mean energy per amplitude under [`EssCode::amplitude_distribution`].
    pub fn mean_energy(&self) -> f64 {
        self.amplitude_distribution()
            .iter()
            .zip(&self.alphabet)
            .map(|(p, a)| p * (*a as f64).powi(2))
            .sum()
    }

    fn compute_marginal(&self) -> Vec<f64> {
        let na = self.alphabet.len();
        let total = BigUint::one() << self.input_bits;
        let whole_tree = &total == self.num_sequences();

        // subtrees left of the walk to index 2^k, grouped by level
        let mut subtrees: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.block_length + 1];
        let mut path = Vec::new();
        if !whole_tree {
            path = self.walk(&total, |l, j, k| subtrees[l + 1].push((j, k.unwrap())));
        }
        let path_idx: Vec<usize> = path
            .iter()
            .map(|a| self.alphabet.binary_search(a).unwrap())
            .collect();

        // expected amplitude counts of a uniform suffix, swept from level L down
        let mut occ = vec![0.0f64; self.width * na];
        let mut counts = vec![0.0f64; na];
        for l in (0..=self.block_length).rev() {
            if l < self.block_length {
                let next = &self.trellis[l + 1];
                let row = &self.trellis[l];
                let mut fresh = vec![0.0f64; self.width * na];
                for k in 0..self.width {
                    if row[k].is_zero() {
                        continue;
                    }
                    let dst = &mut fresh[k * na..(k + 1) * na];
                    for (j, d) in self.deltas.iter().enumerate() {
                        let Some(c) = next.get(k + d) else { break };
                        let w = ratio(c, &row[k]);
                        dst[j] += w;
                        for (t, v) in dst.iter_mut().zip(&occ[(k + d) * na..(k + d + 1) * na]) {
                            *t += w * v;
                        }
                    }
                }
                occ = fresh;
            }
            if whole_tree && l == 0 {
                counts.copy_from_slice(&occ[0..na]);
            }
            // subtrees hanging off level l - 1: prefix path[..l-1], then choice j
            for &(j, k) in &subtrees[l] {
                let w = ratio(&self.trellis[l][k], &total);
                for &p in &path_idx[..l - 1] {
                    counts[p] += w;
                }
                counts[j] += w;
                for (t, v) in counts.iter_mut().zip(&occ[k * na..(k + 1) * na]) {
                    *t += w * v;
                }
            }
        }
        counts.iter().map(|c| c / self.block_length as f64).collect()
    }
}

pub fn index_from_bits(bits: &[bool]) -> BigUint {
    let mut v = BigUint::zero();
    for b in bits {
        v <<= 1;
        if *b {
            v += 1u32;
        }
    }
    v
}

pub fn bits_from_index(index: &BigUint, len: usize) -> Vec<bool> {
    (0..len).rev().map(|i| index.bit(i as u64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// All `|alphabet|^len` sequences in lexicographic order.
    fn all_sequences(alphabet: &[u32], len: usize) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new()];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|p| {
                    alphabet.iter().map(move |a| {
                        let mut q = p.clone();
                        q.push(*a);
                        q
                    })
                })
                .collect();
        }
        out
    }

    fn energy(s: &[u32]) -> u64 {
        s.iter().map(|a| (*a as u64).pow(2)).sum()
    }

    #[test]
    fn two_amplitude_example() {
        let code = EssCode::new(&[1, 3], 2, 10).unwrap();
        assert_eq!(code.num_sequences(), &BigUint::from(3u32));
        assert_eq!(code.input_bits(), 1);
        assert_eq!(code.encode(&BigUint::from(0u32)).unwrap(), vec![1, 1]);
        assert_eq!(code.encode(&BigUint::from(1u32)).unwrap(), vec![1, 3]);
        assert!(code.encode(&BigUint::from(2u32)).is_err());
        assert_eq!(code.decode(&[1, 3]).unwrap(), BigUint::from(1u32));
        // (3, 1) is inside the sphere but beyond the 2^k addressed indices
        assert!(matches!(code.decode(&[3, 1]), Err(Error::InvalidCodeword(_))));
        assert!(matches!(code.decode(&[3, 3]), Err(Error::InvalidCodeword(_))));
    }

    #[test]
    fn sphere_containing_everything() {
        let code = EssCode::new(&[1, 3, 5, 7], 5, 5 * 49).unwrap();
        assert_eq!(code.num_sequences(), &BigUint::from(4u32.pow(5)));
        assert_eq!(code.input_bits(), 10);
    }

    #[test]
    fn below_minimum_energy_is_infeasible() {
        assert!(matches!(EssCode::new(&[1, 3], 4, 3), Err(Error::Infeasible(_))));
    }

    #[test]
    fn trellis_recursion_holds() {
        let code = EssCode::new(&[1, 3, 5, 7], 6, 120).unwrap();
        // reachable budgets at level l: at most E_max - l * a0^2
        for l in 0..6 {
            for e in 0..=120 - l as u64 {
                let Some(lhs) = code.count(l, e) else { continue };
                let want: BigUint = code
                    .alphabet()
                    .iter()
                    .filter(|a| (**a as u64).pow(2) <= e)
                    .map(|a| code.count(l + 1, e - (*a as u64).pow(2)).unwrap())
                    .sum();
                assert_eq!(lhs, want, "l={l} e={e}");
            }
        }
        for e in 0..=114 {
            assert_eq!(code.count(6, e), Some(BigUint::one()));
        }
    }

    #[test]
    fn counts_match_brute_force_l4() {
        let alphabet = [1, 3, 5, 7];
        let seqs = all_sequences(&alphabet, 4);
        for e_max in 4..=4 * 49 + 3 {
            let code = EssCode::new(&alphabet, 4, e_max).unwrap();
            let brute = seqs.iter().filter(|s| energy(s) <= e_max).count();
            assert_eq!(code.num_sequences(), &BigUint::from(brute), "E_max={e_max}");
        }
    }

    #[test]
    fn marginal_matches_enumeration() {
        let alphabet = [1, 3, 5, 7];
        let seqs = all_sequences(&alphabet, 4);
        for e_max in [20, 44, 60, 100, 196] {
            let code = EssCode::new(&alphabet, 4, e_max).unwrap();
            let n = 1usize << code.input_bits();
            let used: Vec<_> = seqs.iter().filter(|s| energy(s) <= e_max).take(n).collect();
            let mut freq = [0.0; 4];
            for s in &used {
                for a in s.iter() {
                    freq[alphabet.iter().position(|b| b == a).unwrap()] += 1.0;
                }
            }
            let p = code.amplitude_distribution();
            for j in 0..4 {
                let want = freq[j] / (4 * n) as f64;
                assert!((p[j] - want).abs() < 1e-12, "E_max={e_max}: {p:?}");
            }
        }
    }

    #[test]
    fn rate_is_monotone_in_energy() {
        let mut prev = 0.0;
        for e_max in (16..=16 * 49).step_by(8) {
            let r = EssCode::new(&[1, 3, 5, 7], 16, e_max).unwrap().rate();
            assert!(r >= prev);
            prev = r;
        }
    }

    #[test]
    fn for_rate_picks_the_smallest_bound() {
        let code = EssCode::for_rate(&[1, 3, 5, 7], 32, 1.5).unwrap();
        assert!(code.rate() >= 1.5);
        let smaller = EssCode::new(&[1, 3, 5, 7], 32, code.max_energy() - 8).unwrap();
        assert!(smaller.rate() < 1.5);
        assert!(EssCode::for_rate(&[1, 3], 8, 1.5).is_err());
    }

    #[test]
    fn long_block_round_trip() {
        let alphabet: Vec<u32> = (0..8).map(|i| 2 * i + 1).collect();
        let code = EssCode::for_rate(&alphabet, 256, 2.2).unwrap();
        assert!(code.input_bits() >= 564);
        assert!(code.num_sequences().bits() > 64);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let idx = code.random_index(&mut rng);
            let seq = code.encode(&idx).unwrap();
            assert!(energy(&seq) <= code.max_energy());
            assert_eq!(code.decode(&seq).unwrap(), idx);
        }
        let p = code.amplitude_distribution();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bit_helpers_round_trip() {
        let bits = vec![true, false, true, true, false, false, true];
        let idx = index_from_bits(&bits);
        assert_eq!(idx, BigUint::from(0b1011001u32));
        assert_eq!(bits_from_index(&idx, 7), bits);
    }
}
