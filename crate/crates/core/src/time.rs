//! Integer time arithmetic. One tick is one millisecond in every case study.

/// A point in time or a duration, in ticks.
pub type Time = i64;

pub fn gcd(mut a: Time, mut b: Time) -> Time {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs()
}

pub fn lcm(a: Time, b: Time) -> Time {
    if a == 0 || b == 0 {
        return 0;
    }
    (a / gcd(a, b)) * b
}

/// Rounds `x` to the nearest integer; `None` when it is further than `tol`
/// away from it.
pub fn integral(x: f64, tol: f64) -> Option<Time> {
    let r = if x >= 0.0 { (x + 0.5) as Time } else { -((-x + 0.5) as Time) };
    let d = x - r as f64;
    if d <= tol && d >= -tol { Some(r) } else { None }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lcm_by_hand() {
        assert_eq!(lcm(20, 50), 100);
        assert_eq!(lcm(420, 840), 840);
        assert_eq!(lcm(lcm(480, 360), 960), 2880);
    }

    #[test]
    fn integral_tolerance() {
        assert_eq!(integral(3.0000001, 1e-6), Some(3));
        assert_eq!(integral(-2.9999999, 1e-6), Some(-3));
        assert_eq!(integral(2.5, 1e-6), None);
    }
}
