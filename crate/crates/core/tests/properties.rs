use std::collections::BTreeMap;

use pml::baseline::{
    critical_threshold, eu_incumbent, optimal_effort, switch_decision, BaselineParams, Decision,
    ThresholdRange,
};
use pml::calibration::{fit_replicator, parse_series, Period, SeriesPoint, ShareSeries};
use pml::population::{run_population, Heterogeneity, PopulationConfig};
use pml::replicator::{
    find_equilibria, integrate, utility_gap, ReplicatorField, ReplicatorParams, DEFAULT_GAP_TOL,
};
use proptest::prelude::*;

prop_compose! {
    fn baseline()(
        p0 in 0.0..=1.0f64,
        alpha in 0.0..=2.0f64,
        k in 0.1..=5.0f64,
        eps in 0.0..=0.5f64,
        loss in 0.0..=2.0f64,
        theta in 0.0..=1.0f64,
        n_s in 0.0..=1.0f64,
    ) -> BaselineParams {
        BaselineParams::new(p0, alpha, k, eps, loss, theta, n_s, 1.0 - n_s).unwrap()
    }
}

prop_compose! {
    fn replicator()(
        alpha_net in 0.01..=2.0f64,
        gamma in 1.01..=5.0f64,
        p0 in 0.0..=1.0f64,
        alpha_mit in 0.0..=2.0f64,
        k in 0.1..=5.0f64,
        eps in 0.0..=0.5f64,
        loss in 0.0..=2.0f64,
    ) -> ReplicatorParams {
        ReplicatorParams::new(alpha_net, gamma, p0, alpha_mit, k, eps, loss).unwrap()
    }
}

proptest! {
    #[test]
    fn optimal_effort_beats_any_feasible_effort(p in baseline(), u in 0.0..=1.0f64) {
        let sol = optimal_effort(&p);
        let e_max = if p.alpha_mit() > 0.0 { p.max_effort() } else { 10.0 };
        let e = u * e_max;
        prop_assert!(sol.e_star >= 0.0);
        prop_assert!(sol.eu_s_star >= eu_incumbent(e, &p).unwrap() - 1e-12);
    }

    #[test]
    fn decision_flips_at_threshold(p in baseline()) {
        let res = critical_threshold(&p);
        prop_assume!(res.p_star_range == ThresholdRange::Within);
        if res.p_star > 1e-6 {
            let below = p.with_p0(res.p_star - 1e-6).unwrap();
            prop_assert_ne!(switch_decision(&below), Decision::Switch);
        }
        if res.p_star < 1.0 - 1e-6 {
            let above = p.with_p0(res.p_star + 1e-6).unwrap();
            prop_assert_ne!(switch_decision(&above), Decision::Stay);
        }
    }

    #[test]
    fn gap_is_increasing(p in replicator(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        prop_assume!((a - b).abs() > 1e-9);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(utility_gap(lo, &p).unwrap() < utility_gap(hi, &p).unwrap());
    }

    #[test]
    fn shares_stay_in_unit_interval(p in replicator(), s0 in 0.0..=1.0f64, dt in 0.01..=0.5f64) {
        let traj = integrate(s0, &p, 20.0, dt).unwrap();
        prop_assert!(traj.shares.iter().all(|s| (0.0..=1.0).contains(s)));
        prop_assert_eq!(*traj.times.last().unwrap(), 20.0);
    }

    #[test]
    fn equilibria_are_sorted_with_boundaries(p in replicator()) {
        let set = find_equilibria(&p, 256, DEFAULT_GAP_TOL);
        prop_assert_eq!(set.points.first().unwrap().share, 0.0);
        prop_assert_eq!(set.points.last().unwrap().share, 1.0);
        prop_assert!(set.points.windows(2).all(|w| w[0].share < w[1].share));
        prop_assert!(set.interior().count() <= 1);
    }

    #[test]
    fn flow_moves_away_from_tipping_share(p in replicator(), s0 in 0.01..0.99f64) {
        let set = find_equilibria(&p, 256, DEFAULT_GAP_TOL);
        let traj = integrate(s0, &p, 5.0, 0.05).unwrap();
        match set.tipping_share {
            Some(t) if s0 < t - 1e-6 => prop_assert!(traj.final_share() <= s0),
            Some(t) if s0 > t + 1e-6 => prop_assert!(traj.final_share() >= s0),
            _ => {}
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn population_conserves_and_reproduces(
        p in baseline(),
        n in 2usize..200,
        mu in 0.01..=1.0f64,
        x0 in 0.0..=1.0f64,
        seed in any::<u64>(),
    ) {
        let config = PopulationConfig {
            n_agents: n,
            revision_rate: mu,
            rounds: 20,
            seed,
            base: p,
            heterogeneity: Heterogeneity::default(),
            initial_share_alt: x0,
        };
        let a = run_population(&config).unwrap();
        prop_assert_eq!(&a, &run_population(&config).unwrap());
        prop_assert_eq!(a.share_path.len(), 21);
        for (r, s) in a.share_path.iter().enumerate().skip(1) {
            let alt = (s * n as f64).round() as u64;
            prop_assert_eq!(alt + a.exposure[r], n as u64);
            prop_assert!(a.sanction_events[r] <= a.exposure[r]);
        }
    }

    #[test]
    fn fits_stay_in_bounds(p in replicator(), s0 in 0.05..0.95f64) {
        let traj = integrate(s0, &p, 5.0, 0.05).unwrap();
        let points = (0..=5)
            .map(|i| SeriesPoint { period: Period::Year(2000 + i), share: traj.share_at(i as f64) })
            .collect();
        let series = ShareSeries::new("prop", points).unwrap();
        let bounds = BTreeMap::from([(ReplicatorField::AlphaNet, (0.05, 1.0))]);
        let res = fit_replicator(&series, &[ReplicatorField::AlphaNet], &bounds, &p, 0.05).unwrap();
        let a = res.fitted[&ReplicatorField::AlphaNet];
        prop_assert!((0.05..=1.0).contains(&a));
        prop_assert!(res.pass_sse.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(res.fitted_path.len(), series.len());
    }
}

proptest! {
    #[test]
    fn period_text_round_trips(y in 1900i32..2100, q in 1u8..=4) {
        for p in [Period::Year(y), Period::Quarter(y, q)] {
            prop_assert_eq!(p.to_string().parse::<Period>().unwrap(), p);
        }
    }

    #[test]
    fn series_csv_round_trips(shares in prop::collection::vec(0.0..=1.0f64, 4..20), start in 1950i32..2000) {
        let points = shares
            .iter()
            .enumerate()
            .map(|(i, &share)| SeriesPoint { period: Period::Year(start + i as i32), share })
            .collect();
        let series = ShareSeries::new("round trip", points).unwrap();
        let mut buf = Vec::new();
        series.write_csv(&mut buf).unwrap();
        let back = parse_series(std::str::from_utf8(&buf).unwrap(), "x").unwrap();
        prop_assert_eq!(back, series);
    }
}
