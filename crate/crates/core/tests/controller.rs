use proptest::prelude::*;

use swing_impedance::ctrlsim::{pva_limit, Admittance, ControllerParams, PvaLimits};

fn limits() -> impl Strategy<Value = PvaLimits> {
    (0.2..2.0, 0.5..10.0, 10.0..2000.0f64).prop_map(|(pos, vel, acc)| PvaLimits {
        pos,
        vel,
        acc,
        ..PvaLimits::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn limited_commands_respect_every_bound(
        l in limits(),
        start in -1.0..1.0f64,
        commands in prop::collection::vec(-50.0..50.0f64, 1..200),
        dt in prop::sample::select(vec![0.0005, 0.001, 0.002]),
    ) {
        let mut pos = start * l.pos;
        let mut vel = 0.0;
        for c in commands {
            let v = pva_limit(&l, c, pos, vel, dt);
            prop_assert!(v.abs() <= l.vel + 1e-9);
            prop_assert!((v - vel).abs() <= l.acc * dt + 1e-9);
            pos += v * dt;
            prop_assert!(pos.abs() <= l.pos + 1e-9);
            vel = v;
        }
    }

    #[test]
    fn admittance_is_linear(a in -5.0..5.0f64, b in -5.0..5.0f64, n in 1usize..200) {
        let p = ControllerParams::default();
        let run = |scale: f64| {
            let mut adm = Admittance::new(&p);
            (0..n).map(|i| adm.step(scale * ((i as f64) * 0.05).sin())).collect::<Vec<_>>()
        };
        let (ya, yb, yab) = (run(a), run(b), run(a + b));
        for i in 0..n {
            prop_assert!((ya[i] + yb[i] - yab[i]).abs() <= 1e-9 * (1.0 + yab[i].abs()));
        }
    }
}
