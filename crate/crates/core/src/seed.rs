//! Deterministic sub-seed derivation.

/// Seed-domain tags. The tag is folded into the top bit of every derived
/// seed, so training and battery seeds can never coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedDomain {
    Training = 0,
    Battery = 1,
}

const DOMAIN_BIT: u64 = 1 << 63;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a parent seed with a sequence of indices.
pub fn mix(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Per-item seed inside a domain; the top bit carries the domain tag.
pub fn domain_seed(domain: SeedDomain, seed: u64, index: u64, attempt: u64) -> u64 {
    let body = mix(seed, &[domain as u64, index, attempt]) & !DOMAIN_BIT;
    match domain {
        SeedDomain::Training => body,
        SeedDomain::Battery => body | DOMAIN_BIT,
    }
}

pub fn domain_of(seed: u64) -> SeedDomain {
    if seed & DOMAIN_BIT == 0 {
        SeedDomain::Training
    } else {
        SeedDomain::Battery
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domains_are_disjoint() {
        for i in 0..1000 {
            assert_eq!(domain_of(domain_seed(SeedDomain::Training, 7, i, 0)), SeedDomain::Training);
            assert_eq!(domain_of(domain_seed(SeedDomain::Battery, 7, i, 0)), SeedDomain::Battery);
        }
    }

    #[test]
    fn mixing_is_order_sensitive() {
        assert_ne!(mix(1, &[2, 3]), mix(1, &[3, 2]));
        assert_eq!(mix(1, &[2, 3]), mix(1, &[2, 3]));
    }
}
