//! Shared inputs for the criterion benches.

use fstrm::signal::{generate, Frame, SignalSpec, SinusoidSpec};

pub const FS_HZ: f64 = 51_200.0;

/// Three harmonics of a 1197 Hz line in white noise, exactly `n` samples long.
pub fn harmonic_frame(n: usize, seed: u64) -> Frame {
    let spec = SignalSpec {
        components: vec![
            SinusoidSpec::new(1197.0, 1.0, 0.3),
            SinusoidSpec::new(2394.0, 0.6, 1.3),
            SinusoidSpec::new(3591.0, 0.4, 2.3),
        ],
        noise_std: 0.1,
        fs_hz: FS_HZ,
        duration_s: n as f64 / FS_HZ,
        rng_seed: seed,
    };
    let mut x = generate(&spec).expect("valid bench spec");
    x.resize(n, 0.0);
    Frame::new(x, FS_HZ)
}
