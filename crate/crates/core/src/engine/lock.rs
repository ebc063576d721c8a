//! Mutex wrapper that enforces the global acquisition order.
//!
//! Every guard carries a [`Rank`]; a thread may only acquire a guard whose
//! rank is strictly greater than every rank it already holds. Agents come
//! first (by name), then locations (by name), then the commitment book, the
//! event sink and the transcript sink. Violations panic in debug builds.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Deref, DerefMut};

use parking_lot::{Mutex, MutexGuard};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LockClass {
    Agent,
    Location,
    Book,
    Sink,
    Transcripts,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rank {
    pub class: LockClass,
    pub key: String,
}

impl Rank {
    pub fn new(class: LockClass, key: impl Into<String>) -> Self {
        Rank { class, key: key.into() }
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({})", self.class, self.key)
    }
}

thread_local! {
    static HELD: RefCell<Vec<Rank>> = const { RefCell::new(Vec::new()) };
}

/// Ranks currently held by this thread, in acquisition order.
pub fn held_ranks() -> Vec<Rank> {
    HELD.with(|h| h.borrow().clone())
}

pub struct OrderedMutex<T> {
    rank: Rank,
    inner: Mutex<T>,
}

pub struct OrderedGuard<'a, T> {
    guard: MutexGuard<'a, T>,
    rank: &'a Rank,
}

impl<T> OrderedMutex<T> {
    pub fn new(rank: Rank, value: T) -> Self {
        OrderedMutex {
            rank,
            inner: Mutex::new(value),
        }
    }

    pub fn rank(&self) -> &Rank {
        &self.rank
    }

    pub fn lock(&self) -> OrderedGuard<'_, T> {
        if cfg!(debug_assertions) {
            HELD.with(|h| {
                if let Some(top) = h.borrow().iter().max() {
                    if *top >= self.rank {
                        panic!("lock order violation: acquiring {} while holding {}", self.rank, top);
                    }
                }
            });
        }
        let guard = self.inner.lock();
        if cfg!(debug_assertions) {
            HELD.with(|h| h.borrow_mut().push(self.rank.clone()));
        }
        OrderedGuard {
            guard,
            rank: &self.rank,
        }
    }

    pub fn into_inner(self) -> T {
        self.inner.into_inner()
    }
}

impl<T> Drop for OrderedGuard<'_, T> {
    fn drop(&mut self) {
        if cfg!(debug_assertions) {
            HELD.with(|h| {
                let mut h = h.borrow_mut();
                if let Some(pos) = h.iter().rposition(|r| r == self.rank) {
                    h.remove(pos);
                }
            });
        }
    }
}

impl<T> Deref for OrderedGuard<'_, T> {
    type Target = T;
    fn deref(&self) -> &T {
        &self.guard
    }
}

impl<T> DerefMut for OrderedGuard<'_, T> {
    fn deref_mut(&mut self) -> &mut T {
        &mut self.guard
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascending_acquisition_is_fine() {
        let a = OrderedMutex::new(Rank::new(LockClass::Agent, "David Kim"), 0);
        let b = OrderedMutex::new(Rank::new(LockClass::Agent, "Lisa Kim"), 0);
        let l = OrderedMutex::new(Rank::new(LockClass::Location, "Local Diner"), 0);
        let ga = a.lock();
        let gb = b.lock();
        let gl = l.lock();
        assert_eq!(held_ranks().len(), 3);
        drop((gl, gb, ga));
        assert!(held_ranks().is_empty());
    }

    #[test]
    #[cfg(debug_assertions)]
    #[should_panic(expected = "lock order violation")]
    fn location_before_agent_panics() {
        let a = OrderedMutex::new(Rank::new(LockClass::Agent, "Lisa Kim"), 0);
        let l = OrderedMutex::new(Rank::new(LockClass::Location, "Local Diner"), 0);
        let _gl = l.lock();
        let _ga = a.lock();
    }

    #[test]
    #[cfg(debug_assertions)]
    #[should_panic(expected = "lock order violation")]
    fn reverse_name_order_panics() {
        let a = OrderedMutex::new(Rank::new(LockClass::Location, "A"), 0);
        let b = OrderedMutex::new(Rank::new(LockClass::Location, "B"), 0);
        let _gb = b.lock();
        let _ga = a.lock();
    }

    #[test]
    fn out_of_order_release_keeps_audit_consistent() {
        let a = OrderedMutex::new(Rank::new(LockClass::Agent, "A"), 0);
        let b = OrderedMutex::new(Rank::new(LockClass::Book, ""), 0);
        let ga = a.lock();
        let gb = b.lock();
        drop(ga);
        if cfg!(debug_assertions) {
            assert_eq!(held_ranks(), vec![Rank::new(LockClass::Book, "")]);
        }
        drop(gb);
        assert!(held_ranks().is_empty());
    }
}
