use driftcheck_core::claims::{Claim, Template};
use driftcheck_core::critic::{
    discriminative_score, semantic_energy, CriticConfig, CriticError, CriticVerdict, TautologyDirection,
};

const STUB: &str = env!("CARGO_BIN_EXE_critic-stub");

fn stub(args: &str) -> CriticConfig {
    let mut config = CriticConfig::external(format!("{STUB} {args}"));
    config.timeout_ms = 500;
    config
}

fn claim(text: &str) -> Claim {
    Claim::new("c", text, None).unwrap()
}

#[test]
fn schema_rules() {
    let critic = CriticConfig::default().build().unwrap();
    let j = |p, h| critic.judge(p, h).unwrap();
    let same = j("alba likes tea.", "alba likes tea.");
    let conflict = j("alba likes tea.", "alba likes coffee.");
    let other_subject = j("alba likes tea.", "brin likes coffee.");
    let unparsed = j("alba likes tea.", "This is a true statement");
    assert!(same.entailment > 0.9 && same.contradiction < 0.05);
    assert!(conflict.contradiction > 0.9);
    assert!(other_subject.neutral > 0.8);
    assert_eq!(unparsed, other_subject);
    assert!(matches!(critic.judge(" ", "x y z."), Err(CriticError::EmptyInput)));
}

#[test]
fn schema_critic_respects_the_template() {
    let config = CriticConfig {
        template: Template::new("{s} has {r} equal to {o}").unwrap(),
        ..CriticConfig::default()
    };
    let critic = config.build().unwrap();
    let v = critic.judge("mira has colour equal to red", "mira has colour equal to blue").unwrap();
    assert!(v.contradiction > 0.9);
}

#[test]
fn fixed_external_verdict_passes_through() {
    let config = stub("--verdict 0.2,0.3,0.5");
    let critic = config.build().unwrap();
    let e_sem = semantic_energy(&claim("a b c."), "a b d.", critic.as_ref()).unwrap();
    assert_eq!(e_sem, 0.5);

    let config = stub("--verdict 0.8,0.15,0.05");
    let critic = config.build().unwrap();
    assert_eq!(discriminative_score(&claim("a b c."), critic.as_ref(), &config).unwrap(), 0.8);
}

#[test]
fn uniform_critic_gives_a_third() {
    let critic = stub("").build().unwrap();
    let e_sem = semantic_energy(&claim("x y z."), "x y w.", critic.as_ref()).unwrap();
    assert!((e_sem - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(CriticVerdict::uniform().contradiction, 1.0 / 3.0);
}

#[test]
fn tautology_direction_swaps_sides() {
    let mut config = CriticConfig::default();
    assert_eq!(config.tautology_pair("q"), ("q", "This is a true statement"));
    config.tautology_direction = TautologyDirection::ClaimAsHypothesis;
    assert_eq!(config.tautology_pair("q"), ("This is a true statement", "q"));
}

#[test]
fn dropped_requests_time_out_alone() {
    let critic = stub("--by-length --skip-every 3").build().unwrap();
    let texts: Vec<String> = (0..9).map(|i| "p".repeat(i + 1)).collect();
    let pairs: Vec<(&str, &str)> = texts.iter().map(|t| (t.as_str(), "h")).collect();
    let out = critic.judge_batch(&pairs);
    for (i, r) in out.iter().enumerate() {
        if (i + 1) % 3 == 0 {
            assert!(matches!(r, Err(CriticError::Timeout { .. })), "{i}: {r:?}");
        } else {
            let expected = ((i + 1) % 10) as f64 / 10.0;
            assert!((r.as_ref().unwrap().contradiction - expected).abs() < 1e-12, "{i}");
        }
    }
}

#[test]
fn unnormalized_answers_are_rejected() {
    let critic = stub("--verdict 0.5,0.5,0.5").build().unwrap();
    let err = critic.judge("a b c.", "a b c.").unwrap_err();
    assert!(matches!(err, CriticError::NotNormalized { sum, .. } if (sum - 1.5).abs() < 1e-12));
}

#[test]
fn launch_problems_surface_at_build() {
    let missing = CriticConfig {
        kind: driftcheck_core::critic::CriticKind::External,
        ..CriticConfig::default()
    };
    assert!(matches!(missing.build().err(), Some(CriticError::MissingCommand)));
    let bogus = CriticConfig::external("/no/such/critic --flag");
    assert!(matches!(bogus.build().err(), Some(CriticError::Spawn { .. })));
}
