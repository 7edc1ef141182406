use std::fmt;

/// Maximum number of classes a taxonomy may declare; id 255 is the void sentinel.
pub const MAX_CLASSES: usize = 255;

/// A fixed-width bitset over class ids `0..256`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ClassSet([u64; 4]);

impl ClassSet {
    pub const fn empty() -> Self {
        Self([0; 4])
    }

    /// The set `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        let mut set = Self::empty();
        for (w, word) in set.0.iter_mut().enumerate() {
            let lo = w * 64;
            if n >= lo + 64 {
                *word = u64::MAX;
            } else if n > lo {
                *word = (1u64 << (n - lo)) - 1;
            }
        }
        set
    }

    #[inline]
    pub fn insert(&mut self, id: u8) {
        self.0[(id >> 6) as usize] |= 1u64 << (id & 63);
    }

    #[inline]
    pub fn remove(&mut self, id: u8) {
        self.0[(id >> 6) as usize] &= !(1u64 << (id & 63));
    }

    #[inline]
    pub fn contains(&self, id: u8) -> bool {
        (self.0[(id >> 6) as usize] >> (id & 63)) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn union(&self, other: &Self) -> Self {
        Self(std::array::from_fn(|i| self.0[i] | other.0[i]))
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self(std::array::from_fn(|i| self.0[i] & other.0[i]))
    }

    pub fn difference(&self, other: &Self) -> Self {
        Self(std::array::from_fn(|i| self.0[i] & !other.0[i]))
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    /// Largest member plus one, or 0 for the empty set.
    pub fn bound(&self) -> usize {
        (0..4)
            .rev()
            .find(|&w| self.0[w] != 0)
            .map_or(0, |w| w * 64 + 64 - self.0[w].leading_zeros() as usize)
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..4usize).flat_map(move |w| {
            let mut word = self.0[w];
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let bit = word.trailing_zeros() as usize;
                word &= word - 1;
                Some((w * 64 + bit) as u8)
            })
        })
    }
}

impl FromIterator<u8> for ClassSet {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        let mut set = Self::empty();
        for id in iter {
            set.insert(id);
        }
        set
    }
}

impl fmt::Debug for ClassSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
