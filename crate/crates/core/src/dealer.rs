//! Secret sharing phase: pick the field, split the secret and its hash.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};
use thiserror::Error;

use crate::field::{is_prime, FieldElement, FieldError, Polynomial, PrimeModulus};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DealerError {
    #[error("threshold t={t} must satisfy 1 <= t <= n={n}")]
    InvalidThreshold { t: usize, n: usize },
    #[error("secret {secret} does not fit in Z_{d}")]
    SecretOutOfRange { secret: u64, d: u64 },
    #[error("modulus {d} must be a prime greater than n={n}")]
    InvalidModulus { d: u64, n: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DealerConfig {
    pub n: usize,
    pub t: usize,
    pub secret: u64,
    pub rng_seed: u64,
    pub d_override: Option<u64>,
}

/// One player's share of the secret and of its hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SharePacket {
    pub player_id: usize,
    pub x: FieldElement,
    pub f_share: FieldElement,
    pub g_share: FieldElement,
}

impl SharePacket {
    pub fn modulus(&self) -> PrimeModulus {
        self.x.modulus()
    }
}

#[derive(Serialize, Deserialize)]
struct PacketWire {
    player_id: usize,
    x: u64,
    f_share: u64,
    g_share: u64,
    d: u64,
}

impl Serialize for SharePacket {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PacketWire {
            player_id: self.player_id,
            x: self.x.value(),
            f_share: self.f_share.value(),
            g_share: self.g_share.value(),
            d: self.modulus().get(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SharePacket {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let wire = PacketWire::deserialize(deserializer)?;
        let d = PrimeModulus::new(wire.d).map_err(D::Error::custom)?;
        for v in [wire.x, wire.f_share, wire.g_share] {
            if v >= d.get() {
                return Err(D::Error::custom(format!("share field {v} not reduced mod {d}")));
            }
        }
        if wire.x != wire.player_id as u64 {
            return Err(D::Error::custom("x must equal player_id"));
        }
        Ok(SharePacket {
            player_id: wire.player_id,
            x: d.element(wire.x),
            f_share: d.element(wire.f_share),
            g_share: d.element(wire.g_share),
        })
    }
}

/// Output of the sharing phase. The polynomials stay with the dealer;
/// they are exposed for test oracles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deal {
    pub modulus: PrimeModulus,
    pub packets: Vec<SharePacket>,
    pub secret_poly: Polynomial,
    pub hash_poly: Polynomial,
}

/// Smallest prime in `(n, 2n]`; 2 when `n = 1`.
pub fn choose_modulus(n: usize) -> PrimeModulus {
    let start = n.max(1) as u64 + 1;
    let d = (start..)
        .find(|&d| is_prime(d))
        .expect("a prime exists past any u64 this small");
    PrimeModulus::new(d).unwrap()
}

/// SHA-1 of the secret's 8-byte big-endian encoding, read as a 160-bit
/// big-endian integer and reduced mod `d`.
pub fn hash_to_field(secret: u64, d: PrimeModulus) -> FieldElement {
    let digest = Sha1::digest(secret.to_be_bytes());
    let m = d.get() as u128;
    let r = digest.iter().fold(0u128, |acc, &b| (acc * 256 + b as u128) % m);
    d.element(r as u64)
}

fn resolve_modulus(config: &DealerConfig) -> Result<PrimeModulus, DealerError> {
    match config.d_override {
        None => Ok(choose_modulus(config.n)),
        Some(d) => {
            let bad = DealerError::InvalidModulus { d, n: config.n };
            if d <= config.n as u64 {
                return Err(bad);
            }
            PrimeModulus::new(d).map_err(|_| bad)
        }
    }
}

fn random_poly(constant: FieldElement, t: usize, rng: &mut ChaCha8Rng) -> Polynomial {
    let d = constant.modulus();
    let mut coeffs = Vec::with_capacity(t);
    coeffs.push(constant);
    coeffs.extend((1..t).map(|_| d.element(rng.gen_range(0..d.get()))));
    Polynomial::new(coeffs).expect("non-empty coefficients over one field")
}

/// Splits `config.secret` and its hash with degree `t - 1` polynomials and
/// hands player `i` the evaluations at `x = i`.
pub fn deal(config: &DealerConfig) -> Result<Deal, DealerError> {
    let (n, t) = (config.n, config.t);
    if t < 1 || t > n {
        return Err(DealerError::InvalidThreshold { t, n });
    }
    let modulus = resolve_modulus(config)?;
    if config.secret >= modulus.get() {
        return Err(DealerError::SecretOutOfRange {
            secret: config.secret,
            d: modulus.get(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let secret_poly = random_poly(modulus.element(config.secret), t, &mut rng);
    let hash_poly = random_poly(hash_to_field(config.secret, modulus), t, &mut rng);
    let packets = (1..=n)
        .map(|i| {
            let x = modulus.element(i as u64);
            Ok(SharePacket {
                player_id: i,
                x,
                f_share: secret_poly.eval(x)?,
                g_share: hash_poly.eval(x)?,
            })
        })
        .collect::<Result<_, FieldError>>()?;
    Ok(Deal {
        modulus,
        packets,
        secret_poly,
        hash_poly,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::interpolate_at_zero;
    use std::collections::HashMap;

    fn cfg(n: usize, t: usize, secret: u64, seed: u64) -> DealerConfig {
        DealerConfig {
            n,
            t,
            secret,
            rng_seed: seed,
            d_override: None,
        }
    }

    fn subsets(n: usize, t: usize) -> Vec<Vec<usize>> {
        (0u32..1 << n)
            .filter(|m| m.count_ones() as usize == t)
            .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
            .collect()
    }

    #[test]
    fn modulus_choice() {
        assert_eq!(choose_modulus(3).get(), 5);
        assert_eq!(choose_modulus(4).get(), 5);
        assert_eq!(choose_modulus(1).get(), 2);
        for n in 1..200usize {
            let d = choose_modulus(n).get();
            assert!(d > n as u64 && d <= 2 * n as u64);
            assert!((n as u64 + 1..d).all(|k| !is_prime(k)));
        }
    }

    #[test]
    fn hash_goldens() {
        // Reference values from an independent SHA-1 implementation.
        let d7 = PrimeModulus::new(7).unwrap();
        assert_eq!(hash_to_field(0, d7).value(), 0);
        let d5 = PrimeModulus::new(5).unwrap();
        let got: Vec<u64> = (0..5).map(|s| hash_to_field(s, d5).value()).collect();
        assert_eq!(got, vec![0, 2, 3, 4, 0]);
        let d11 = PrimeModulus::new(11).unwrap();
        let got: Vec<u64> = (0..11).map(|s| hash_to_field(s, d11).value()).collect();
        assert_eq!(got, vec![1, 0, 2, 1, 8, 6, 9, 8, 6, 2, 7]);
        let d2 = PrimeModulus::new(2).unwrap();
        assert!(hash_to_field(1, d2).value() < 2);
        assert_eq!(hash_to_field(12345, d7), hash_to_field(12345, d7));
    }

    #[test]
    fn digest_golden() {
        let digest = Sha1::digest(0u64.to_be_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hex, "05fe405753166f125559e7c9ac558654f107c7e9");
    }

    #[test]
    fn threshold_one_gives_constant_shares() {
        let deal = deal(&cfg(4, 1, 3, 11)).unwrap();
        let h = hash_to_field(3, deal.modulus);
        for p in &deal.packets {
            assert_eq!(p.f_share.value(), 3);
            assert_eq!(p.g_share, h);
        }
    }

    #[test]
    fn every_qualified_subset_reconstructs() {
        for n in 1..=6 {
            for t in 1..=n {
                for secret in [0u64, 1, n as u64] {
                    let deal = deal(&cfg(n, t, secret, (n * 10 + t) as u64)).unwrap();
                    let h = hash_to_field(secret, deal.modulus);
                    for size in t..=n {
                        for subset in subsets(n, size).into_iter().take(20) {
                            // Any size >= t works; interpolate on the first t points of a larger set.
                            let pick: Vec<&SharePacket> = subset.iter().take(t).map(|&i| &deal.packets[i]).collect();
                            let f: Vec<_> = pick.iter().map(|p| (p.x, p.f_share)).collect();
                            let g: Vec<_> = pick.iter().map(|p| (p.x, p.g_share)).collect();
                            assert_eq!(interpolate_at_zero(&f).unwrap().value(), secret);
                            assert_eq!(interpolate_at_zero(&g).unwrap(), h);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn packets_are_in_range_and_at_player_points() {
        let deal = deal(&cfg(6, 4, 5, 99)).unwrap();
        assert_eq!(deal.modulus.get(), 7);
        for (i, p) in deal.packets.iter().enumerate() {
            assert_eq!(p.player_id, i + 1);
            assert_eq!(p.x.value(), (i + 1) as u64);
            assert!(p.f_share.value() < 7 && p.g_share.value() < 7);
            assert_eq!(p.f_share, deal.secret_poly.eval(p.x).unwrap());
            assert_eq!(p.g_share, deal.hash_poly.eval(p.x).unwrap());
        }
    }

    #[test]
    fn determinism() {
        assert_eq!(deal(&cfg(5, 3, 2, 7)).unwrap(), deal(&cfg(5, 3, 2, 7)).unwrap());
        assert_ne!(
            deal(&cfg(5, 3, 2, 7)).unwrap().packets,
            deal(&cfg(5, 3, 2, 8)).unwrap().packets
        );
    }

    #[test]
    fn config_errors() {
        assert_eq!(
            deal(&cfg(5, 6, 0, 0)),
            Err(DealerError::InvalidThreshold { t: 6, n: 5 })
        );
        assert_eq!(
            deal(&cfg(5, 0, 0, 0)),
            Err(DealerError::InvalidThreshold { t: 0, n: 5 })
        );
        assert_eq!(
            deal(&cfg(3, 2, 5, 0)),
            Err(DealerError::SecretOutOfRange { secret: 5, d: 5 })
        );
        let mut c = cfg(5, 3, 1, 0);
        c.d_override = Some(5);
        assert_eq!(deal(&c), Err(DealerError::InvalidModulus { d: 5, n: 5 }));
        c.d_override = Some(9);
        assert_eq!(deal(&c), Err(DealerError::InvalidModulus { d: 9, n: 5 }));
        c.d_override = Some(7);
        assert_eq!(deal(&c).unwrap().modulus.get(), 7);
    }

    #[test]
    fn fewer_than_t_shares_hide_the_secret() {
        // For every choice of the t-1 random coefficients and every secret,
        // count how often each view of t-1 shares arises. Perfect secrecy
        // means each view is produced equally often by every secret.
        for (d, t) in [(5u64, 2usize), (5, 3), (7, 2), (7, 3)] {
            let field = PrimeModulus::new(d).unwrap();
            let xs: Vec<FieldElement> = (1..t as u64).map(|x| field.element(x)).collect();
            let mut counts: HashMap<Vec<u64>, HashMap<u64, usize>> = HashMap::new();
            let combos = d.pow(t as u32 - 1);
            for secret in 0..d {
                for code in 0..combos {
                    let mut rest = code;
                    let mut coeffs = vec![field.element(secret)];
                    for _ in 1..t {
                        coeffs.push(field.element(rest % d));
                        rest /= d;
                    }
                    let p = Polynomial::new(coeffs).unwrap();
                    let view: Vec<u64> = xs.iter().map(|&x| p.eval(x).unwrap().value()).collect();
                    *counts.entry(view).or_default().entry(secret).or_default() += 1;
                }
            }
            for per_secret in counts.values() {
                assert_eq!(per_secret.len() as u64, d);
                let first = per_secret[&0];
                assert!(per_secret.values().all(|&c| c == first));
            }
        }
    }

    #[test]
    fn packet_json_shape() {
        let deal = deal(&cfg(3, 2, 1, 4)).unwrap();
        let text = serde_json::to_string(&deal.packets[1]).unwrap();
        let at = |k: &str| text.find(&format!("\"{k}\":")).unwrap();
        let order = ["player_id", "x", "f_share", "g_share", "d"].map(at);
        assert!(order.windows(2).all(|w| w[0] < w[1]), "{text}");
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(json.as_object().unwrap().len(), 5);
        assert_eq!(json["x"], 2);
        assert_eq!(json["d"], 5);
        let back: SharePacket = serde_json::from_value(json).unwrap();
        assert_eq!(back, deal.packets[1]);
        let bad = serde_json::json!({"player_id": 1, "x": 1, "f_share": 9, "g_share": 0, "d": 5});
        assert!(serde_json::from_value::<SharePacket>(bad).is_err());
    }
}
