//! Bit-packed code storage for fast Hamming distance scans.

/// Codes packed into 64-bit words, one row per code. Bit `k` of a code lands
/// in word `k / 64`, bit position `k % 64`.
#[derive(Clone, Debug)]
pub struct PackedCodes {
    n: usize,
    m: usize,
    words_per_code: usize,
    words: Vec<u64>,
}

impl PackedCodes {
    pub fn from_rows<'a>(rows: impl Iterator<Item = &'a [u8]>, m: usize) -> Self {
        let words_per_code = m.div_ceil(64).max(1);
        let mut words = Vec::new();
        let mut n = 0;
        for row in rows {
            debug_assert_eq!(row.len(), m);
            let mut packed = vec![0u64; words_per_code];
            for (k, &bit) in row.iter().enumerate() {
                if bit != 0 {
                    packed[k / 64] |= 1u64 << (k % 64);
                }
            }
            words.extend_from_slice(&packed);
            n += 1;
        }
        Self {
            n,
            m,
            words_per_code,
            words,
        }
    }

    pub fn pack_one(code: &[u8]) -> Vec<u64> {
        let words_per_code = code.len().div_ceil(64).max(1);
        let mut packed = vec![0u64; words_per_code];
        for (k, &bit) in code.iter().enumerate() {
            if bit != 0 {
                packed[k / 64] |= 1u64 << (k % 64);
            }
        }
        packed
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn code_len(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn words(&self, i: usize) -> &[u64] {
        &self.words[i * self.words_per_code..(i + 1) * self.words_per_code]
    }

    /// Hamming distance between stored code `i` and a packed query.
    #[inline]
    pub fn hamming(&self, i: usize, query: &[u64]) -> u32 {
        self.words(i)
            .iter()
            .zip(query)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

/// Hamming distance between two unpacked bit slices.
pub fn hamming_unpacked(a: &[u8], b: &[u8]) -> u32 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_matches_unpacked_distance() {
        let rows: Vec<Vec<u8>> = vec![
            vec![0, 1, 0, 1, 1, 0, 1],
            vec![1, 1, 1, 1, 1, 1, 1],
            vec![0, 0, 0, 0, 0, 0, 0],
        ];
        let packed = PackedCodes::from_rows(rows.iter().map(|r| r.as_slice()), 7);
        let query = vec![1, 0, 0, 1, 0, 0, 1];
        let q = PackedCodes::pack_one(&query);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(packed.hamming(i, &q), hamming_unpacked(row, &query));
        }
    }

    #[test]
    fn wide_codes_span_words() {
        let a: Vec<u8> = (0..130).map(|i| (i % 2) as u8).collect();
        let mut b = a.clone();
        b[0] ^= 1;
        b[64] ^= 1;
        b[129] ^= 1;
        let packed = PackedCodes::from_rows(std::iter::once(a.as_slice()), 130);
        let q = PackedCodes::pack_one(&b);
        assert_eq!(packed.hamming(0, &q), 3);
    }
}
