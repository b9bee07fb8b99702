use std::path::PathBuf;

use proptest::prelude::*;

use penalty_flow::config::{
    BetaSpec, DiscreteSpec, IntegratorSpec, LambdaSpec, OutputSpec, ProblemSpec, RunConfig, ScheduleSpec, StartSpec,
};
use penalty_flow::dynamics::Method;
use penalty_flow::schedules::{classify, lambda_beta_limsup_bound_time, HfitzStatus, Schedule};

proptest! {
    #[test]
    fn product_stays_below_midpoint_after_bound_time(
        c_lambda in 0.1f64..5.0,
        c_beta in 0.1f64..5.0,
        p in 0.51f64..1.0,
        gap in 0.0f64..0.5,
        mu in 0.1f64..3.0,
        offsets in proptest::collection::vec(0.0f64..1e6, 1..20),
    ) {
        let q = (p - gap).max(0.0);
        let s = Schedule::new(c_lambda, p, c_beta, q).unwrap();
        prop_assume!(s.product_limsup() < 2.0 * mu);
        let t0 = lambda_beta_limsup_bound_time(&s, mu).unwrap();
        // Overflows to +inf when the crossing lies beyond f64 range.
        prop_assume!(t0.is_finite());
        let threshold = 0.5 * (s.product_limsup() + 2.0 * mu);
        for dt in offsets {
            let t = t0 + dt;
            prop_assert!(s.lambda(t) * s.beta(t) <= threshold * (1.0 + 1e-12), "t = {t}");
        }
    }

    #[test]
    fn classifier_is_monotone_in_exponents(p in 0.05f64..2.0, q in 0.0f64..2.0) {
        let r = classify(&Schedule::new(1.0, p, 0.5, q).unwrap(), 1.0).unwrap();
        prop_assert_eq!(r.h3_l2.ok, p > 0.5);
        prop_assert_eq!(r.h3_not_l1.ok, p <= 1.0);
        prop_assert_eq!(r.hfitz_distsq_ok == HfitzStatus::Holds, p + q > 1.0);
        prop_assert_eq!(r.product_ok.ok, q <= p);
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6f64..1e6, -1e-6f64..1e-6, Just(0.0)]
}

fn problem() -> impl Strategy<Value = ProblemSpec> {
    prop_oneof![
        "[A-Za-z0-9_]{1,24}".prop_map(ProblemSpec::Builtin),
        (any::<u64>(), 1usize..64, 0.0f64..4.0).prop_map(|(seed, dim, gamma)| ProblemSpec::Random { seed, dim, gamma }),
    ]
}

fn start() -> impl Strategy<Value = StartSpec> {
    prop_oneof![
        Just(StartSpec::Named("zeros".into())),
        proptest::collection::vec(finite(), 1..8).prop_map(StartSpec::Point),
    ]
}

fn path() -> impl Strategy<Value = Option<PathBuf>> {
    proptest::option::of("[a-z]{1,8}/[a-z]{1,8}\\.(csv|json)".prop_map(PathBuf::from))
}

fn config() -> impl Strategy<Value = RunConfig> {
    let schedule = (finite(), finite(), finite(), finite()).prop_map(|(cl, p, cb, q)| ScheduleSpec {
        lambda: LambdaSpec { c: cl, p },
        beta: BetaSpec { c: cb, q },
    });
    let integrator = (any::<bool>(), 1.0f64..1e5, 1e-4f64..1.0, 0.01f64..1.0, 0usize..100).prop_map(
        |(rk4, t_end, h_max, safety, record_every)| IntegratorSpec {
            method: if rk4 { Method::Rk4 } else { Method::Euler },
            t_end,
            h_max,
            safety,
            record_every,
        },
    );
    let outputs =
        (path(), path(), path()).prop_map(|(trajectory_csv, report_json, discrete_csv)| OutputSpec {
            trajectory_csv,
            report_json,
            discrete_csv,
        });
    let discrete = proptest::option::of((1usize..10_000, any::<bool>()).prop_map(|(n, use_h1)| DiscreteSpec { n, use_h1 }));
    (problem(), schedule, integrator, start(), outputs, discrete).prop_map(
        |(problem, schedule, integrator, x0, outputs, discrete)| RunConfig {
            problem,
            schedule,
            integrator,
            x0,
            outputs,
            discrete,
        },
    )
}

proptest! {
    #[test]
    fn config_round_trips_through_json(cfg in config()) {
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
