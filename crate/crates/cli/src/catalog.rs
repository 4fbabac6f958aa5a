//! Named potentials and seeded random instances.

use ergodic_core::discretize::Mesh;
use ergodic_core::{Exponent, Potential, ProblemSpec, Profile};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::PotentialConfig;

pub const NAMES: [&str; 7] = [
    "bump",
    "exponential",
    "algebraic",
    "gaussian",
    "zero",
    "constant",
    "sum",
];

fn allowed(name: &str) -> &'static [&'static str] {
    match name {
        "bump" | "gaussian" => &["amplitude", "center", "width", "c0"],
        "exponential" => &["amplitude", "rate", "c0"],
        "algebraic" => &["amplitude", "power", "c0"],
        "constant" => &["value"],
        "sum" => &["components", "c0"],
        _ => &[],
    }
}

fn given(cfg: &PotentialConfig) -> Vec<&'static str> {
    let mut v = Vec::new();
    let fields = [
        ("amplitude", cfg.amplitude.is_some()),
        ("center", cfg.center.is_some()),
        ("width", cfg.width.is_some()),
        ("rate", cfg.rate.is_some()),
        ("power", cfg.power.is_some()),
        ("value", cfg.value.is_some()),
        ("c0", cfg.c0.is_some()),
        ("components", !cfg.components.is_empty()),
    ];
    for (name, present) in fields {
        if present {
            v.push(name);
        }
    }
    v
}

fn profile(cfg: &PotentialConfig, exponent: Option<&Exponent>) -> Result<Profile, String> {
    let name = cfg.name.as_str();
    if !NAMES.contains(&name) {
        return Err(format!(
            "unknown potential '{name}' (expected one of {})",
            NAMES.join(", ")
        ));
    }
    if let Some(bad) = given(cfg).into_iter().find(|k| !allowed(name).contains(k)) {
        return Err(format!("potential '{name}' takes no parameter '{bad}'"));
    }
    let amplitude = cfg.amplitude.unwrap_or(-1.0);
    let width = cfg.width.unwrap_or(1.0);
    let center = cfg.center.unwrap_or(0.0);
    if matches!(name, "bump" | "gaussian") && !(width > 0.0) {
        return Err(format!("potential '{name}' needs width > 0"));
    }
    Ok(match name {
        "bump" => Profile::Bump {
            amplitude,
            center,
            width,
        },
        "gaussian" => Profile::Gaussian {
            amplitude,
            center,
            width,
        },
        "exponential" => {
            let rate = cfg.rate.unwrap_or(1.0);
            if !(rate > 0.0) {
                return Err("potential 'exponential' needs rate > 0".into());
            }
            Profile::Exponential { amplitude, rate }
        }
        "algebraic" => {
            // Defaults to the critical decay <x>^{-m*}.
            let power = match (cfg.power, exponent) {
                (Some(p), _) => p,
                (None, Some(e)) => e.m_star(),
                (None, None) => return Err("potential 'algebraic' needs a power".into()),
            };
            if !(power > 0.0) {
                return Err("potential 'algebraic' needs power > 0".into());
            }
            Profile::Algebraic { amplitude, power }
        }
        "zero" => Profile::Zero,
        "constant" => Profile::Constant(
            cfg.value
                .ok_or_else(|| "potential 'constant' needs a value".to_string())?,
        ),
        "sum" => {
            if cfg.components.is_empty() {
                return Err("potential 'sum' needs at least one component".into());
            }
            Profile::Sum(
                cfg.components
                    .iter()
                    .map(|c| profile(c, exponent))
                    .collect::<Result<_, _>>()?,
            )
        }
        _ => unreachable!("name checked above"),
    })
}

/// Potential described by `cfg`. The default bump, exponential well and
/// algebraic shapes carry their decay constant; others only when `c0` is
/// given.
pub fn build(cfg: &PotentialConfig, exponent: Option<&Exponent>) -> Result<Potential, String> {
    let p = Potential::new(profile(cfg, exponent)?);
    let c0 = match (cfg.c0, cfg.name.as_str()) {
        (Some(c), _) => {
            if !(c > 0.0 && c.is_finite()) {
                return Err("c0 must be positive".into());
            }
            Some(c)
        }
        (None, "algebraic") => Some(cfg.amplitude.unwrap_or(-1.0).abs()),
        // (1 - |x|/w)_+ <= <x>^-2 for w <= 1 and e^{-k|x|} <= <x>^-2 for
        // k >= 1, so |amplitude| certifies every m* <= 2.
        (None, "bump") if cfg.center.unwrap_or(0.0) == 0.0 && cfg.width.unwrap_or(1.0) <= 1.0 => {
            Some(cfg.amplitude.unwrap_or(-1.0).abs())
        }
        (None, "exponential") if cfg.rate.unwrap_or(1.0) >= 1.0 => {
            Some(cfg.amplitude.unwrap_or(-1.0).abs())
        }
        _ => None,
    };
    Ok(match c0 {
        Some(c) => p.with_c0(c),
        None => p,
    })
}

/// Bump or Gaussian with random amplitude in `[-1, 1)`, width in
/// `[0.5, 2)` and, on the line, centre in `[-2, 2)`.
pub fn random_profile(rng: &mut ChaCha8Rng, radial: bool) -> Profile {
    let center = if radial { 0.0 } else { rng.gen_range(-2.0..2.0) };
    let amplitude = rng.gen_range(-1.0..1.0);
    let width = rng.gen_range(0.5..2.0);
    if rng.gen_bool(0.5) {
        Profile::Gaussian {
            amplitude,
            center,
            width,
        }
    } else {
        Profile::Bump {
            amplitude,
            center,
            width,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: ProblemSpec,
    pub mesh: Mesh,
}

/// The unit bump plus a random profile, at a random exponent in
/// `{3, 4, 8, inf}` and coupling in `[0.5, 4)`; radial in `N in {2, 3}`
/// with probability 0.3.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let exponent = match rng.gen_range(0..4) {
        0 => Exponent::finite(3.0),
        1 => Exponent::finite(4.0),
        2 => Exponent::finite(8.0),
        _ => Ok(Exponent::infinite()),
    }
    .expect("catalog exponents exceed 2");
    let beta = rng.gen_range(0.5..4.0);
    let radial = rng.gen_bool(0.3);
    let potential = Potential::new(Profile::Sum(vec![
        Profile::Bump {
            amplitude: -1.0,
            center: 0.0,
            width: 1.0,
        },
        random_profile(rng, radial),
    ]));
    if radial {
        let dim = rng.gen_range(2..=3);
        Instance {
            spec: ProblemSpec::radial(dim, exponent, beta, potential).expect("N >= 2"),
            mesh: Mesh::radial(dim, 20.0, 512).expect("valid mesh"),
        }
    } else {
        Instance {
            spec: ProblemSpec::line(exponent, beta, potential),
            mesh: Mesh::line(20.0, 1024).expect("valid mesh"),
        }
    }
}
