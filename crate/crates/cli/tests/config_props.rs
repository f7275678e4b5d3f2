use proptest::prelude::*;

use abc_cli::{CliError, LSchedule, Overrides, RunConfig};

fn list(v: &[u64]) -> String {
    v.iter().map(u64::to_string).collect::<Vec<_>>().join(", ")
}

fn config_text(stages: usize, k: &[u64], l: Option<&[u64]>, s: &[u64], seed: u64, rho: f64) -> String {
    let l = l.map_or("auto".to_string(), list);
    format!(
        "stages = {stages}\nk = [{}]\nl = {l}\ns = {}\nsigma_size = {}\nseed = {seed}\nrho = {rho}\n",
        list(k),
        list(s),
        s[0]
    )
}

proptest! {
    #[test]
    fn text_round_trips(
        stages in 1usize..4,
        k in prop::collection::vec(1u64..6, 4),
        l in prop::option::of(prop::collection::vec(2u64..9, 4)),
        s in prop::collection::vec(1u64..5, 5),
        seed in any::<u64>(),
        rho in 0.001f64..2.0,
    ) {
        let text = config_text(stages, &k, l.as_deref(), &s, seed, rho);
        let cfg = RunConfig::parse(&text).unwrap().finish(&Overrides::default()).unwrap();
        prop_assert_eq!(cfg.k.len(), stages);
        prop_assert_eq!(cfg.s.len(), stages + 1);
        if let LSchedule::Fixed(ls) = &cfg.l {
            prop_assert_eq!(ls.len(), stages);
        }
        prop_assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn stage_flag_beyond_the_schedule_is_rejected(len in 1usize..4, extra in 1usize..3) {
        let k = vec![2; len];
        let s = vec![2; len + 1];
        let text = config_text(len, &k, Some(&k), &s, 1, 0.1);
        let o = Overrides { stages: Some(len + extra), ..Overrides::default() };
        prop_assert!(matches!(RunConfig::parse(&text).unwrap().finish(&o), Err(CliError::Usage(_))));
    }
}
