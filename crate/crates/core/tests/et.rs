use toa_lab::et::*;
use toa_lab::kijowski::pi_k_distribution;
use toa_lab::numerics::GridSpec;
use toa_lab::state::State;

fn incoming() -> State {
    State::gaussian(-5.0, 10.0, 1.0).unwrap()
}

/// Gaussian smoothing of `values` on a uniform grid.
fn smooth(values: &[f64], h: f64, sigma: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|l| {
                    let d = (i as f64 - l as f64) * h;
                    (-d * d / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt()) * values[l] * h
                })
                .sum()
        })
        .collect()
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

#[test]
fn joint_mass_is_one_once_the_time_tails_are_added() {
    let s = incoming();
    let app = EtApparatusState::new(2.0, 2.0).unwrap();
    let l = 20.0;
    let me = GridSpec::new(-10.0, 150.0, 161).unwrap();
    let mt = GridSpec::new(-l, l, 401).unwrap();
    let j = et_joint_distribution(&s, &app, 0.0, &me, &mt).unwrap();
    let tail = 2.0 * time_tail_coefficient(&app, 1.0) / l;
    assert!((j.mass() + tail - 1.0).abs() < 1e-4, "{} + {tail}", j.mass());
    assert!(j.min_value() >= -1e-10);
    let m = toa_marginal_et(&j).unwrap();
    assert!((m.norm_estimate + tail - 1.0).abs() < 1e-4);
    assert!(m.min_value() >= -1e-10);
    // the far edges follow the asymptote Ā/μT²
    let asym = time_tail_coefficient(&app, 1.0) / (l * l);
    let edge = 0.5 * (m.values[0] + m.values[400]);
    assert!((edge - asym).abs() < 0.02 * asym, "{edge} vs {asym}");
}

#[test]
fn narrow_apparatus_shifts_the_energy_reading_upwards() {
    let s = incoming();
    let app = EtApparatusState::new(0.2, 0.2).unwrap();
    let me = GridSpec::new(10.0, 120.0, 1101).unwrap();
    let mt = GridSpec::new(-15.0, 15.0, 301).unwrap();
    let j = et_joint_distribution(&s, &app, 0.0, &me, &mt).unwrap();
    let mean = j.energy_marginal().mean();
    // ⟨E⟩ = (ħ²k0² + ħ²/δ²)/(2m)
    let e_mean = 0.5 * (100.0 + 1.0);
    assert!(mean >= e_mean, "{mean} < {e_mean}");
}

#[test]
fn time_marginal_is_broadened_and_distorted() {
    let s = incoming();
    let app = EtApparatusState::new(1.0, 1.0).unwrap();
    let me = GridSpec::new(0.0, 120.0, 121).unwrap();
    let mt = GridSpec::new(-10.0, 10.0, 401).unwrap();
    let j = et_joint_distribution(&s, &app, 0.0, &me, &mt).unwrap();
    let m = toa_marginal_et(&j).unwrap();
    let k = pi_k_distribution(&s, 0.0, &mt).unwrap();
    assert!(m.variance() > k.variance(), "{} vs {}", m.variance(), k.variance());
    let h = mt.spacing();
    let misfit = |sig: f64| -> f64 {
        smooth(&k.values, h, sig).iter().zip(&m.values).map(|(a, b)| (a - b).powi(2)).sum()
    };
    let best = golden_min(misfit, 0.05, 3.0);
    let sup = smooth(&k.values, h, best)
        .iter()
        .zip(&m.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(sup > 1e-3, "best width {best}: sup distance {sup}");
}

#[test]
fn joint_csv_layout() {
    let s = incoming();
    let app = EtApparatusState::new(2.0, 2.0).unwrap();
    let me = GridSpec::new(40.0, 60.0, 3).unwrap();
    let mt = GridSpec::new(0.0, 1.0, 2).unwrap();
    let j = et_joint_distribution(&s, &app, 0.1, &me, &mt).unwrap();
    let mut buf = Vec::new();
    j.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# kind=et_joint t=1.0000000000000001e-1"));
    assert!(lines[0].contains("\"spread_i\":2.0"));
    assert_eq!(lines[1], "mu_E,mu_T,value");
    assert_eq!(lines.len(), 2 + 6);
    let row: Vec<f64> = lines[2].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row[0], 40.0);
    assert_eq!(row[1], 0.0);
    assert_eq!(row[2], j.value(0, 0));
    let mut ebuf = Vec::new();
    j.energy_marginal().write_csv(&mut ebuf).unwrap();
    assert!(String::from_utf8(ebuf).unwrap().lines().nth(1) == Some("mu_E,value"));
}

#[test]
fn apparatus_descriptor_round_trips() {
    let app = EtApparatusState::with_centers(1.5, 0.5, 0.2, -0.1).unwrap();
    assert_eq!(EtApparatusState::from_json(&app.to_json()).unwrap(), app);
    let d = EtApparatusState::from_json(r#"{"spread_i":2,"spread_f":2}"#).unwrap();
    assert_eq!(d, EtApparatusState::new(2.0, 2.0).unwrap());
    assert!(EtApparatusState::from_json(r#"{"spread_i":-1,"spread_f":2}"#).is_err());
    assert!(EtApparatusState::from_json(r#"{"spread_i":1,"spread_f":2,"x":1}"#).is_err());
}
