use latident::experiments::{run_trial, TrialConfig};

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(base: u64, dim: usize, num_obs: usize, trial: usize) -> u64 {
    let mut s = splitmix64(base);
    for field in [dim as u64, num_obs as u64, trial as u64] {
        s = splitmix64(s ^ field);
    }
    s
}

fn main() {
    let cfg = TrialConfig::default();
    for trial in 0..20usize {
        let t0 = std::time::Instant::now();
        let out = run_trial(32, 40, &cfg, derive_seed(0xBEEF, 32, 40, trial));
        println!(
            "trial {trial:2}: ok {} swaps {:6} ms {:6.0} fail {:?}",
            out.success,
            out.swap_count,
            t0.elapsed().as_secs_f64() * 1e3,
            out.failure.as_deref().map(|s| &s[..s.len().min(110)])
        );
    }
}
