use num_complex::Complex64;
use relaysim::channel::{db_to_linear, draw, NetworkConfig};
use relaysim::rng::{substream, Purpose};

const DRAWS: u64 = 100_000;

fn config(iri_db: f64) -> NetworkConfig {
    NetworkConfig::iid(2, 2, 20.0, 0.0, iri_db)
}

#[test]
fn unit_variance_source_links() {
    let cfg = config(0.0);
    let mut rng = substream(11, Purpose::DataChannel, 0);
    let (mut power, mut pseudo) = (0.0, Complex64::new(0.0, 0.0));
    for _ in 0..DRAWS {
        let ch = draw(&cfg, &mut rng);
        power += ch.h_s[0].norm_sqr() / 2.0;
        pseudo += ch.h_s[0].as_slice().iter().map(|z| z * z).sum::<Complex64>() / 2.0;
    }
    let mean = power / DRAWS as f64;
    assert!((mean - 1.0).abs() < 0.02, "mean power {mean}");
    // circular symmetry: E[h²] = 0
    assert!((pseudo / DRAWS as f64).norm() < 0.02);
}

#[test]
fn strong_interference_second_moment() {
    let cfg = config(10.0);
    let mut rng = substream(12, Purpose::DataChannel, 0);
    let mut total = 0.0;
    for _ in 0..DRAWS {
        let ch = draw(&cfg, &mut rng);
        total += ch.inter(1, 0).entries().iter().map(|z| z.norm_sqr()).sum::<f64>() / 4.0;
    }
    let mean = total / DRAWS as f64;
    assert!((mean / db_to_linear(10.0) - 1.0).abs() < 0.02, "second moment {mean}");
}

#[test]
fn asymmetric_gains_scale_each_link() {
    let mut cfg = NetworkConfig::iid(3, 1, 20.0, 0.0, 0.0);
    cfg.var_sr = vec![db_to_linear(1.0), 1.0, db_to_linear(-1.0)];
    let mut rng = substream(13, Purpose::DataChannel, 0);
    let mut totals = [0.0; 3];
    for _ in 0..DRAWS {
        let ch = draw(&cfg, &mut rng);
        for (t, h) in totals.iter_mut().zip(&ch.h_s) {
            *t += h.norm_sqr();
        }
    }
    for (t, v) in totals.iter().zip(&cfg.var_sr) {
        assert!((t / DRAWS as f64 / v - 1.0).abs() < 0.02);
    }
}

#[test]
fn consecutive_slots_are_uncorrelated() {
    let cfg = config(0.0);
    let n = 20_000;
    let series: Vec<Complex64> = (0..n)
        .map(|t| draw(&cfg, &mut substream(5, Purpose::DataChannel, t)).h_d[1].as_slice()[0])
        .collect();
    let lag1: Complex64 = series.windows(2).map(|w| w[0].conj() * w[1]).sum::<Complex64>() / (n - 1) as f64;
    // standard error of the lag-1 estimate is about 1/√n
    assert!(lag1.norm() < 5.0 / (n as f64).sqrt(), "lag-1 correlation {lag1}");
}

#[test]
fn same_seed_same_realization() {
    let cfg = config(3.0);
    let a = draw(&cfg, &mut substream(9, Purpose::PretrainChannel, 17));
    let b = draw(&cfg, &mut substream(9, Purpose::PretrainChannel, 17));
    let c = draw(&cfg, &mut substream(9, Purpose::DataChannel, 17));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.is_finite());
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = config(0.0);
    cfg.relays = 1;
    assert!(cfg.validate().is_err());
    let mut cfg = config(0.0);
    cfg.var_rd[0] = 0.0;
    assert!(cfg.validate().is_err());
    assert!(config(0.0).with_buffer(0.0).validate().is_err());
    assert!(config(0.0).with_buffer(f64::INFINITY).validate().is_ok());
}
