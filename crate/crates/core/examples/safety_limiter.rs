//! Drives the position/velocity/acceleration limiter with an aggressive
//! command and shows it braking in front of the position bound.
//!
//! ```text
//! cargo run --example safety_limiter
//! ```

use swing_impedance::ctrlsim::{pva_limit, PvaLimits};

fn main() {
    let l = PvaLimits::default();
    let dt = 0.001;
    let (mut pos, mut vel) = (0.6, 0.0);
    println!("{:>6} {:>8} {:>8}", "t [ms]", "pos", "vel");
    for tick in 0..200 {
        vel = pva_limit(&l, 10.0, pos, vel, dt);
        pos += vel * dt;
        if let Some(trip) = l.check(tick as f64 * dt, pos, vel, 0.0) {
            println!("safety trip: {trip:?}");
        }
        if tick % 20 == 0 || (125..150).contains(&tick) {
            println!("{tick:6} {pos:8.4} {vel:8.4}");
        }
    }
    println!("settled at {pos:.4} rad, bound {:.2} rad", l.pos);
}
