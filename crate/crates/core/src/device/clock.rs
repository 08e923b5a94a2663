//! Monotonic timestamps and emulation of slower device hardware.

use std::sync::OnceLock;
use std::thread;
use std::time::{Duration, Instant};

fn epoch() -> Instant {
    static EPOCH: OnceLock<Instant> = OnceLock::new();
    *EPOCH.get_or_init(Instant::now)
}

/// Microseconds on a process-wide monotonic clock.
pub fn now_us() -> u64 {
    epoch().elapsed().as_micros() as u64
}

/// CPU time consumed by the calling thread, where the platform exposes it.
#[cfg(unix)]
pub fn thread_cpu_time() -> Option<Duration> {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    (rc == 0).then(|| Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32))
}

#[cfg(not(unix))]
pub fn thread_cpu_time() -> Option<Duration> {
    None
}

/// Stretches compute phases to `scale` times their cost, emulating an edge
/// CPU that is `scale` times slower than the host.
///
/// The cost is the thread's CPU time when available, so concurrent devices
/// sharing host cores are each charged only for their own work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputeScale(f64);

impl ComputeScale {
    pub const NATIVE: ComputeScale = ComputeScale(1.0);

    pub fn new(scale: f64) -> Option<Self> {
        (scale >= 1.0 && scale.is_finite()).then_some(Self(scale))
    }

    pub fn factor(self) -> f64 {
        self.0
    }

    /// Runs `work` and pads with sleep until `scale * cost` has elapsed.
    pub fn run<T>(self, work: impl FnOnce() -> T) -> T {
        let wall = Instant::now();
        let cpu = thread_cpu_time();
        let out = work();
        let cost = match (cpu, thread_cpu_time()) {
            (Some(a), Some(b)) => b.saturating_sub(a),
            _ => wall.elapsed(),
        };
        let target = cost.mul_f64(self.0);
        let elapsed = wall.elapsed();
        if target > elapsed {
            thread::sleep(target - elapsed);
        }
        out
    }
}

impl Default for ComputeScale {
    fn default() -> Self {
        Self::NATIVE
    }
}
