//! Synthetic rows in the NSL-KDD text layout: 41 features, attack name,
//! difficulty. Class is carried by a few features so a model can learn it.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PROTOCOLS: [&str; 3] = ["tcp", "udp", "icmp"];
const SERVICES: [&str; 6] = ["http", "private", "ftp_data", "smtp", "ecr_i", "domain_u"];
const FLAGS: [&str; 4] = ["SF", "S0", "REJ", "RSTO"];
const ATTACKS: [&[&str]; 5] = [
    &["normal"],
    &["neptune", "smurf", "back"],
    &["satan", "ipsweep", "portsweep"],
    &["buffer_overflow", "rootkit"],
    &["guess_passwd", "warezclient"],
];

/// One row for class `class` (0..5).
pub fn synthetic_line(rng: &mut ChaCha8Rng, class: usize) -> String {
    let mut fields: Vec<String> = Vec::with_capacity(43);
    for f in 0..41 {
        let v = match f {
            1 => PROTOCOLS[rng.random_range(0..PROTOCOLS.len())].to_string(),
            2 => SERVICES[rng.random_range(0..SERVICES.len())].to_string(),
            3 => FLAGS[rng.random_range(0..FLAGS.len())].to_string(),
            // Count-like feature whose range separates classes.
            22 => format!("{}", class * 100 + rng.random_range(0..60)),
            // Rate feature: high for DoS, low otherwise.
            24 => format!(
                "{:.2}",
                if class == 1 {
                    rng.random_range(0.8..=1.0)
                } else {
                    rng.random_range(0.0..0.2)
                }
            ),
            4 | 5 => format!("{}", rng.random_range(0..5000)),
            _ if f >= 24 => format!("{:.2}", rng.random::<f64>()),
            _ => format!("{}", rng.random_range(0..3)),
        };
        fields.push(v);
    }
    let names = ATTACKS[class];
    fields.push(names[rng.random_range(0..names.len())].to_string());
    fields.push(format!("{}", rng.random_range(0..22)));
    fields.join(",")
}

/// `n` rows with class frequencies roughly 50/30/12/3/5 percent.
pub fn synthetic_file(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for _ in 0..n {
        let u: f64 = rng.random();
        let class = match u {
            u if u < 0.50 => 0,
            u if u < 0.80 => 1,
            u if u < 0.92 => 2,
            u if u < 0.95 => 3,
            _ => 4,
        };
        out.push_str(&synthetic_line(&mut rng, class));
        out.push('\n');
    }
    out
}
