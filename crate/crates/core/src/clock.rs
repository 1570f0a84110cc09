use std::sync::Mutex;

use chrono::{DateTime, SubsecRound, Utc};

/// Source of evidence timestamps.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

/// Wall clock, second resolution, never running backwards within one
/// instance.
#[derive(Debug, Default)]
pub struct SystemClock {
    last: Mutex<Option<DateTime<Utc>>>,
}

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        let now = Utc::now().trunc_subsecs(0);
        let mut last = self.last.lock().unwrap();
        let t = match *last {
            Some(prev) if prev > now => prev,
            _ => now,
        };
        *last = Some(t);
        t
    }
}

/// Always returns the same instant. Used for reproducible runs.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}
