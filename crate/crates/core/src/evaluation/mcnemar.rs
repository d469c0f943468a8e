/// Exact two-sided McNemar test on discordant counts `b` and `c`:
/// `min(1, 2 * P[X <= min(b, c)])` with `X ~ Binomial(b + c, 1/2)`.
/// Returns 1 when there are no discordant pairs.
pub fn mcnemar_exact(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c);
    let tail = if n <= 1000 {
        // 0.5^n is exact in binary for n <= 1074; each step multiplies by C ratio.
        let mut term = 0.5f64.powi(n as i32);
        let mut sum = term;
        for i in 0..k {
            term *= (n - i) as f64 / (i + 1) as f64;
            sum += term;
        }
        sum
    } else {
        let ln2 = std::f64::consts::LN_2;
        let mut log_term = -(n as f64) * ln2;
        let mut logs = vec![log_term];
        for i in 0..k {
            log_term += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
            logs.push(log_term);
        }
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max.exp() * logs.iter().map(|l| (l - max).exp()).sum::<f64>()
    };
    (2.0 * tail).min(1.0)
}
