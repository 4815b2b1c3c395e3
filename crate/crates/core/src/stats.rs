//! Small estimators shared by the Monte Carlo drivers.

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Jackknife estimates for the variance of `y` and the correlation of `x` with `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats {
    pub var_x: f64,
    pub var_y: f64,
    pub var_y_se: f64,
    pub corr: f64,
    pub corr_se: f64,
}

/// Sufficient statistics of centred data.
#[derive(Clone, Copy)]
struct Sums {
    n: f64,
    x: f64,
    y: f64,
    xx: f64,
    yy: f64,
    xy: f64,
}

impl Sums {
    fn without(&self, x: f64, y: f64) -> Sums {
        Sums {
            n: self.n - 1.0,
            x: self.x - x,
            y: self.y - y,
            xx: self.xx - x * x,
            yy: self.yy - y * y,
            xy: self.xy - x * y,
        }
    }

    fn var_y(&self) -> f64 {
        (self.yy - self.y * self.y / self.n) / (self.n - 1.0)
    }

    fn var_x(&self) -> f64 {
        (self.xx - self.x * self.x / self.n) / (self.n - 1.0)
    }

    fn corr(&self) -> f64 {
        let cov = (self.xy - self.x * self.y / self.n) / (self.n - 1.0);
        let denom = (self.var_x() * self.var_y()).sqrt();
        if denom > 0.0 {
            cov / denom
        } else {
            0.0
        }
    }
}

/// Delete-one jackknife over paired samples, computed from running sums in
/// linear time.
pub fn jackknife_pair(xs: &[f64], ys: &[f64]) -> PairStats {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 3, "jackknife needs at least three samples");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut s = Sums { n, x: 0.0, y: 0.0, xx: 0.0, yy: 0.0, xy: 0.0 };
    for (&x, &y) in xs.iter().zip(ys) {
        let (x, y) = (x - mx, y - my);
        s.x += x;
        s.y += y;
        s.xx += x * x;
        s.yy += y * y;
        s.xy += x * y;
    }
    let var_y = s.var_y();
    let corr = s.corr();

    let (mut sum_v, mut sum_vv, mut sum_c, mut sum_cc) = (0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let loo = s.without(x - mx, y - my);
        let (v, c) = (loo.var_y(), loo.corr());
        sum_v += v;
        sum_vv += v * v;
        sum_c += c;
        sum_cc += c * c;
    }
    let spread = |sum: f64, sum_sq: f64| {
        let mean = sum / n;
        ((n - 1.0) / n * (sum_sq - n * mean * mean)).max(0.0).sqrt()
    };
    PairStats { var_x: s.var_x(), var_y, var_y_se: spread(sum_v, sum_vv), corr, corr_se: spread(sum_c, sum_cc) }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut best) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        best = best.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    best
}
