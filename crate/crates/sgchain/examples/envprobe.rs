use sgchain::{run, ChainConfig, DriveSpec, Recorders};
use std::f64::consts::PI;

fn main() {
    let lambda: f64 = 0.10891862682163280;
    for t_final in [400.0, 600.0, 800.0, 1200.0] {
        let cfg = ChainConfig {
            t_final,
            drive: DriveSpec { amplitude: 0.01, frequency: 0.9 },
            ..ChainConfig::default()
        };
        let rec = Recorders { probes: vec![20, 40, 60], energy_series: false };
        let out = run(&cfg, &rec).unwrap();
        let t_from = t_final / 2.0;
        let span = t_final - t_from;
        let om = cfg.drive.frequency;
        print!("T={t_final:6}");
        for (j, site) in [20usize, 40, 60].iter().enumerate() {
            let (mut s, mut c, mut wsum) = (0.0f64, 0.0f64, 0.0f64);
            for (t, row) in out.trajectory.times.iter().zip(&out.trajectory.rows) {
                if *t >= t_from {
                    let w = 0.5 * (1.0 - ((t - t_from) / span * 2.0 * PI).cos());
                    s += w * row[j] * (om * t).sin();
                    c += w * row[j] * (om * t).cos();
                    wsum += w;
                }
            }
            let proj = 2.0 * (s * s + c * c).sqrt() / wsum;
            let expect = cfg.drive.amplitude * (-lambda * *site as f64).exp();
            print!("  s{site}: hann{:+6.2}%", 100.0*(proj/expect - 1.0));
        }
        println!();
    }
}
