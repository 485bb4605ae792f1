use std::collections::HashMap;
use std::hash::Hash;
use std::sync::Arc;

use once_cell::sync::OnceCell;
use parking_lot::Mutex;

/// Collapses concurrent computations of the same key into one. Results are
/// not kept once the computation finishes; callers persist them elsewhere
/// and check that cache first.
pub(crate) struct InFlight<K, V> {
    cells: Mutex<HashMap<K, Arc<OnceCell<V>>>>,
}

impl<K: Eq + Hash + Clone, V: Clone> InFlight<K, V> {
    pub fn new() -> Self {
        InFlight {
            cells: Mutex::new(HashMap::new()),
        }
    }

    pub fn run<E>(&self, key: &K, f: impl FnOnce() -> Result<V, E>) -> Result<V, E> {
        let cell = self.cells.lock().entry(key.clone()).or_default().clone();
        let out = cell.get_or_try_init(f).cloned();
        let mut cells = self.cells.lock();
        if cells.get(key).is_some_and(|c| Arc::ptr_eq(c, &cell)) {
            cells.remove(key);
        }
        out
    }
}
