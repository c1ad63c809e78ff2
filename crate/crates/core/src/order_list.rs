//! Linked list over vertex ids with O(1) order queries.
//!
//! Every placed item carries an integer label that increases along the list.
//! When an insertion finds no free label, the smallest enclosing power-of-two
//! label window that is sparse enough gets evenly relabeled, which keeps
//! insertions amortized logarithmic.

const TOP: u64 = 1 << 62;
const DENSITY: f64 = 1.4;

pub(crate) struct OrderList {
    next: Vec<u32>,
    prev: Vec<u32>,
    label: Vec<u64>,
    placed: Vec<bool>,
    len: usize,
}

impl OrderList {
    /// An empty list able to hold ids `0..capacity`.
    pub(crate) fn new(capacity: usize) -> Self {
        let head = capacity;
        let tail = capacity + 1;
        let mut next = vec![u32::MAX; capacity + 2];
        let mut prev = vec![u32::MAX; capacity + 2];
        let mut label = vec![0; capacity + 2];
        next[head] = tail as u32;
        prev[tail] = head as u32;
        label[tail] = TOP + 1;
        OrderList {
            next,
            prev,
            label,
            placed: vec![false; capacity],
            len: 0,
        }
    }

    fn head(&self) -> usize {
        self.placed.len()
    }

    fn tail(&self) -> usize {
        self.placed.len() + 1
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn is_placed(&self, x: usize) -> bool {
        self.placed[x]
    }

    /// Position key of a placed item; larger means later.
    pub(crate) fn key(&self, x: usize) -> u64 {
        debug_assert!(self.placed[x]);
        self.label[x]
    }

    pub(crate) fn push_back(&mut self, y: usize) {
        let last = self.prev[self.tail()] as usize;
        self.insert_after_slot(last, y);
    }

    pub(crate) fn insert_after(&mut self, x: usize, y: usize) {
        debug_assert!(self.placed[x]);
        self.insert_after_slot(x, y);
    }

    pub(crate) fn insert_before(&mut self, x: usize, y: usize) {
        debug_assert!(self.placed[x]);
        let p = self.prev[x] as usize;
        self.insert_after_slot(p, y);
    }

    fn insert_after_slot(&mut self, x: usize, y: usize) {
        assert!(!self.placed[y], "item {y} already placed");
        if self.label[self.next[x] as usize] - self.label[x] < 2 {
            self.relabel_around(x);
        }
        let n = self.next[x] as usize;
        self.label[y] = self.label[x] + (self.label[n] - self.label[x]) / 2;
        self.next[x] = y as u32;
        self.prev[y] = x as u32;
        self.next[y] = n as u32;
        self.prev[n] = y as u32;
        self.placed[y] = true;
        self.len += 1;
    }

    /// Spreads the labels of the smallest sparse window around `x` evenly.
    fn relabel_around(&mut self, x: usize) {
        let (head, tail) = (self.head(), self.tail());
        for i in 1..=62u32 {
            let size = 1u64 << i;
            let base = self.label[x] & !(size - 1);
            let mut first = x;
            while first != head {
                let p = self.prev[first] as usize;
                if p == head || self.label[p] < base {
                    break;
                }
                first = p;
            }
            let mut items = Vec::new();
            let mut cur = first;
            while cur != tail && self.label[cur] < base + size {
                if cur != head {
                    items.push(cur);
                }
                cur = self.next[cur] as usize;
            }
            // one slot for the pending insertion
            let count = items.len() as u64 + 1;
            let sparse = (count as f64) < size as f64 / DENSITY.powi(i as i32);
            if (sparse && 4 * (count + 1) <= size) || i == 62 {
                let gap = size / (count + 1);
                for (k, &it) in items.iter().enumerate() {
                    self.label[it] = base.max(1) + gap * (k as u64 + 1);
                }
                return;
            }
        }
    }

    /// Items from front to back.
    pub(crate) fn to_vec(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len);
        let mut cur = self.next[self.head()] as usize;
        while cur != self.tail() {
            out.push(cur);
            cur = self.next[cur] as usize;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basic_operations() {
        let mut l = OrderList::new(5);
        l.push_back(2);
        l.push_back(0);
        l.insert_after(2, 4);
        l.insert_before(2, 1);
        assert_eq!(l.to_vec(), vec![1, 2, 4, 0]);
        assert!(l.is_placed(4) && !l.is_placed(3));
        assert!(l.key(1) < l.key(2) && l.key(4) < l.key(0));
        assert_eq!(l.len(), 4);
    }

    #[test]
    fn matches_vec_oracle_under_adversarial_inserts() {
        let n = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut l = OrderList::new(n);
        let mut oracle: Vec<usize> = Vec::new();
        l.push_back(0);
        oracle.push(0);
        for y in 1..n {
            // mostly hammer the same spot to force relabeling
            let pos = if rng.random_bool(0.7) { 0 } else { rng.random_range(0..oracle.len()) };
            let x = oracle[pos];
            if rng.random_bool(0.5) {
                l.insert_after(x, y);
                oracle.insert(pos + 1, y);
            } else {
                l.insert_before(x, y);
                oracle.insert(pos, y);
            }
        }
        assert_eq!(l.to_vec(), oracle);
        let keys: Vec<u64> = oracle.iter().map(|&x| l.key(x)).collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }
}
