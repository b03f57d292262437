//! Daily price series: parsing and a seeded synthetic generator.
//!
//! Prices are 10^9 fixed-point reference-currency values per token.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle::SeriesError;
use crate::types::{format_fixed, parse_fixed, RATE_SCALE};

/// Parses `day,price` lines. A leading `day,price` header and blank lines are skipped.
pub fn parse_price_series(text: &str) -> Result<Vec<u64>, SeriesError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || (out.is_empty() && l.eq_ignore_ascii_case("day,price")) {
            continue;
        }
        let err = |reason: String| SeriesError::Parse { line, reason };
        let (day, price) = l.split_once(',').ok_or_else(|| err("expected `day,price`".into()))?;
        let day: usize = day.trim().parse().map_err(|_| err(format!("bad day `{day}`")))?;
        if day != out.len() {
            return Err(err(format!("expected day {}, found {day}", out.len())));
        }
        let price = parse_fixed(price.trim(), 9).map_err(|e| err(e.to_string()))?;
        if price == 0 {
            return Err(err("price must be positive".into()));
        }
        out.push(price);
    }
    Ok(out)
}

pub fn load_price_series(path: impl AsRef<std::path::Path>) -> Result<Vec<u64>, SeriesError> {
    let p = path.as_ref();
    let text = std::fs::read_to_string(p)
        .map_err(|e| SeriesError::Io { path: p.display().to_string(), reason: e.to_string() })?;
    parse_price_series(&text)
}

pub fn format_price_series(prices: &[u64]) -> String {
    let mut s = String::from("day,price\n");
    for (day, p) in prices.iter().enumerate() {
        s.push_str(&format!("{day},{}\n", format_fixed(*p, 9)));
    }
    s
}

/// Random walk in log-price space, rescaled so the lowest day is exactly
/// `min_price` and the highest exactly `max_price`.
pub fn volatile_series(seed: u64, days: usize, min_price: u64, max_price: u64) -> Vec<u64> {
    assert!(days >= 2 && min_price > 0 && max_price >= min_price);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut walk = Vec::with_capacity(days);
    let mut x = 0.0f64;
    for _ in 0..days {
        walk.push(x);
        x += rng.gen_range(-0.04..0.04);
    }
    let lo = walk.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = walk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (ln_min, ln_max) = ((min_price as f64).ln(), (max_price as f64).ln());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut prices: Vec<u64> = walk
        .iter()
        .map(|w| {
            let p = (ln_min + (w - lo) / span * (ln_max - ln_min)).exp().round() as u64;
            p.clamp(min_price, max_price)
        })
        .collect();
    let argmin = walk.iter().position(|w| *w == lo).unwrap_or(0);
    let argmax = walk.iter().position(|w| *w == hi).unwrap_or(days - 1);
    prices[argmin] = min_price;
    prices[argmax] = max_price;
    prices
}

/// 1.0 plus uniform noise within `±max_deviation_ppm` parts per million.
pub fn stable_series(seed: u64, days: usize, max_deviation_ppm: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dev = max_deviation_ppm as i64 * (RATE_SCALE / 1_000_000) as i64;
    (0..days).map(|_| (RATE_SCALE as i64 + rng.gen_range(-dev..=dev)) as u64).collect()
}
