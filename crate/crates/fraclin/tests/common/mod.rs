//! Double-double (≈31 significant digits) arithmetic for independent test
//! oracles. Everything here is built from error-free transforms and exact
//! integer/half-integer recurrences — none of it shares code with the
//! library's Γ or Mittag-Leffler paths.

#[derive(Debug, Clone, Copy)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    // Requires |a| ≥ |b|.
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, f64::mul_add(a, b, -p))
}

impl Dd {
    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        Dd::new(s, e + self.lo + other.lo)
    }

    pub fn sub(self, other: Dd) -> Dd {
        self.add(Dd { hi: -other.hi, lo: -other.lo })
    }

    pub fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        Dd::new(p, e + self.hi * other.lo + self.lo * other.hi)
    }

    pub fn scale(self, k: f64) -> Dd {
        let (p, e) = two_prod(self.hi, k);
        Dd::new(p, e + self.lo * k)
    }

    pub fn div(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.scale(q1));
        let q2 = r.hi / other.hi;
        let r2 = r.sub(other.scale(q2));
        let q3 = r2.hi / other.hi;
        Dd::new(q1, q2 + q3)
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// √π split across two doubles.
pub const SQRT_PI: Dd = Dd { hi: 1.772453850905516, lo: -7.666586499825799e-17 };

/// Γ(k/2) for k = 1..=max_k, from Γ(1/2) = √π, Γ(1) = 1 and the recurrence
/// Γ(x+1) = x·Γ(x) carried out in double-double. Index j holds Γ((j+1)/2).
pub fn gamma_half_integer_ladder(max_k: usize) -> Vec<Dd> {
    let mut ladder: Vec<Dd> = Vec::with_capacity(max_k);
    for k in 1..=max_k {
        let g = match k {
            1 => SQRT_PI,
            2 => Dd::from_f64(1.0),
            _ => {
                let x = (k as f64 - 2.0) / 2.0;
                ladder[k - 3].scale(x)
            }
        };
        ladder.push(g);
    }
    ladder
}

/// Γ(k/2 + 1/2·offset_halves) lookup into the ladder; the argument must be a
/// positive half-integer.
pub fn gamma_half(ladder: &[Dd], halves: usize) -> Dd {
    ladder[halves - 1]
}

/// Σ_k z^k / Γ(k/2 + β) in double-double, for β a positive half-integer
/// (β = beta_halves/2). Truncated when the term falls below 1e-40 of the
/// running sum. Returns the value and the series condition number
/// Σ|term| / |sum| — for z < 0 the alternating sum cancels and any f64
/// evaluation loses log10(condition) digits, so comparisons must scale
/// their tolerance by it.
pub fn ml_half_order_oracle(ladder: &[Dd], beta_halves: usize, z: f64) -> (f64, f64) {
    let zz = Dd::from_f64(z);
    let mut power = Dd::from_f64(1.0);
    let mut sum = Dd::from_f64(0.0);
    let mut abs_sum = 0.0f64;
    for k in 0..240 {
        let term = power.div(gamma_half(ladder, k + beta_halves));
        sum = sum.add(term);
        abs_sum += term.hi.abs();
        if term.hi.abs() < 1e-40 * sum.hi.abs().max(1.0) && k > 8 {
            break;
        }
        power = power.mul(zz);
    }
    let value = sum.to_f64();
    (value, abs_sum / value.abs().max(f64::MIN_POSITIVE))
}

/// 2×2 matrix exponential e^{At} summed term-by-term in double-double.
pub fn expm_2x2_oracle(a: [f64; 4], t: f64) -> [f64; 4] {
    let at: Vec<Dd> = a.iter().map(|&v| Dd::from_f64(v).scale(t)).collect();
    let mul = |x: &[Dd], y: &[Dd]| -> Vec<Dd> {
        vec![
            x[0].mul(y[0]).add(x[1].mul(y[2])),
            x[0].mul(y[1]).add(x[1].mul(y[3])),
            x[2].mul(y[0]).add(x[3].mul(y[2])),
            x[2].mul(y[1]).add(x[3].mul(y[3])),
        ]
    };
    let mut term = vec![
        Dd::from_f64(1.0),
        Dd::from_f64(0.0),
        Dd::from_f64(0.0),
        Dd::from_f64(1.0),
    ];
    let mut sum = term.clone();
    for k in 1..80 {
        term = mul(&term, &at);
        for v in term.iter_mut() {
            *v = v.scale(1.0 / k as f64);
        }
        for (s, v) in sum.iter_mut().zip(&term) {
            *s = s.add(*v);
        }
        if term.iter().map(|v| v.hi.abs()).fold(0.0, f64::max) < 1e-40 {
            break;
        }
    }
    [sum[0].to_f64(), sum[1].to_f64(), sum[2].to_f64(), sum[3].to_f64()]
}
