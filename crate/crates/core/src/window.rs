use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::frame::Timestamped;

/// Fixed-capacity FIFO of the most recent samples, ordered by timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingWindow<T> {
    capacity: usize,
    buf: VecDeque<T>,
}

impl<T: Timestamped> SlidingWindow<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("window capacity must be at least 1".into()));
        }
        Ok(Self {
            capacity,
            buf: VecDeque::with_capacity(capacity + 1),
        })
    }

    /// Appends `sample`, evicting the oldest entry once over capacity.
    /// Ties with the current tail timestamp are accepted.
    pub fn push(&mut self, sample: T) -> Result<()> {
        let t = sample.timestamp();
        if !t.is_finite() {
            return Err(Error::Domain(format!("non-finite timestamp {t}")));
        }
        if let Some(tail) = self.buf.back() {
            if t < tail.timestamp() {
                return Err(Error::OutOfOrder {
                    tail: tail.timestamp(),
                    got: t,
                });
            }
        }
        self.buf.push_back(sample);
        if self.buf.len() > self.capacity {
            self.buf.pop_front();
        }
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.buf.len() == self.capacity
    }

    pub fn latest(&self) -> Option<&T> {
        self.buf.back()
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = &T> + DoubleEndedIterator {
        self.buf.iter()
    }

    pub fn clear(&mut self) {
        self.buf.clear();
    }

    pub fn ready(&self) -> Result<()> {
        if self.is_full() {
            Ok(())
        } else {
            Err(Error::NotReady {
                have: self.buf.len(),
                need: self.capacity,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[derive(Debug, Clone, Copy, PartialEq)]
    struct S(f64);
    impl Timestamped for S {
        fn timestamp(&self) -> f64 {
            self.0
        }
    }

    #[test]
    fn first_push_is_not_full() {
        let mut w = SlidingWindow::new(3).unwrap();
        w.push(S(1.0)).unwrap();
        assert_eq!(w.len(), 1);
        assert!(!w.is_full());
        assert!(matches!(
            w.ready(),
            Err(Error::NotReady { have: 1, need: 3 })
        ));
    }

    #[test]
    fn evicts_oldest() {
        let mut w = SlidingWindow::new(3).unwrap();
        for t in 1..=4 {
            w.push(S(t as f64)).unwrap();
        }
        let ts: Vec<f64> = w.iter().map(|s| s.0).collect();
        assert_eq!(ts, vec![2.0, 3.0, 4.0]);
        assert!(w.is_full());
    }

    #[test]
    fn rejects_out_of_order_but_accepts_ties() {
        let mut w = SlidingWindow::new(3).unwrap();
        w.push(S(2.0)).unwrap();
        w.push(S(2.0)).unwrap();
        let err = w.push(S(1.5)).unwrap_err();
        assert_eq!(
            err,
            Error::OutOfOrder {
                tail: 2.0,
                got: 1.5
            }
        );
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn zero_capacity_is_config_error() {
        assert!(SlidingWindow::<S>::new(0).is_err());
    }

    proptest! {
        #[test]
        fn contents_are_last_k_pushes(k in 1usize..12, n in 0usize..40) {
            let mut w = SlidingWindow::new(k).unwrap();
            let pushed: Vec<f64> = (0..n).map(|i| i as f64 * 0.5).collect();
            for &t in &pushed {
                w.push(S(t)).unwrap();
            }
            let expect = &pushed[n.saturating_sub(k)..];
            let got: Vec<f64> = w.iter().map(|s| s.0).collect();
            prop_assert_eq!(got.as_slice(), expect);
            prop_assert_eq!(w.is_full(), n >= k);
        }
    }
}
