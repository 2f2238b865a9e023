use std::fmt;
use std::str::FromStr;

/// The three floating-point formats handled by the datapath.
///
/// All formats use the IEEE-754 layout: one sign bit, a biased exponent and
/// a trailing significand field. `sig_bits_stored` counts only the explicit
/// significand bits; the hidden leading one is not included.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FpFormat {
    F32,
    F16,
    BF16,
}

impl FpFormat {
    pub const ALL: [FpFormat; 3] = [FpFormat::F32, FpFormat::F16, FpFormat::BF16];

    pub const fn exp_bits(self) -> u32 {
        match self {
            FpFormat::F32 => 8,
            FpFormat::F16 => 5,
            FpFormat::BF16 => 8,
        }
    }

    pub const fn sig_bits_stored(self) -> u32 {
        match self {
            FpFormat::F32 => 23,
            FpFormat::F16 => 10,
            FpFormat::BF16 => 7,
        }
    }

    /// Total encoding width in bits (16 or 32).
    pub const fn width(self) -> u32 {
        1 + self.exp_bits() + self.sig_bits_stored()
    }

    /// Significand precision including the hidden bit.
    pub const fn precision(self) -> u32 {
        self.sig_bits_stored() + 1
    }

    pub const fn bias(self) -> i32 {
        (1 << (self.exp_bits() - 1)) - 1
    }

    pub const fn is_16bit(self) -> bool {
        self.width() == 16
    }

    /// Mask covering every valid bit of an encoding.
    pub const fn mask(self) -> u32 {
        if self.width() == 32 {
            u32::MAX
        } else {
            (1 << self.width()) - 1
        }
    }

    pub const fn sign_mask(self) -> u32 {
        1 << (self.width() - 1)
    }

    pub(crate) const fn exp_field_max(self) -> u32 {
        (1 << self.exp_bits()) - 1
    }

    pub(crate) const fn frac_mask(self) -> u32 {
        (1 << self.sig_bits_stored()) - 1
    }

    /// The canonical quiet NaN: positive sign, all-ones exponent, only the
    /// most significant fraction bit set.
    pub const fn canonical_nan(self) -> u32 {
        (self.exp_field_max() << self.sig_bits_stored()) | (1 << (self.sig_bits_stored() - 1))
    }

    pub const fn infinity(self, negative: bool) -> u32 {
        let inf = self.exp_field_max() << self.sig_bits_stored();
        if negative {
            inf | self.sign_mask()
        } else {
            inf
        }
    }

    pub const fn zero(self, negative: bool) -> u32 {
        if negative {
            self.sign_mask()
        } else {
            0
        }
    }

    pub const fn is_nan(self, bits: u32) -> bool {
        (bits >> self.sig_bits_stored()) & self.exp_field_max() == self.exp_field_max()
            && bits & self.frac_mask() != 0
    }

    pub const fn name(self) -> &'static str {
        match self {
            FpFormat::F32 => "f32",
            FpFormat::F16 => "f16",
            FpFormat::BF16 => "bf16",
        }
    }
}

impl fmt::Display for FpFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FpFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "f32" | "float" | "binary32" => Ok(FpFormat::F32),
            "f16" | "float16" | "binary16" => Ok(FpFormat::F16),
            "bf16" | "bfloat16" => Ok(FpFormat::BF16),
            other => Err(format!("unknown floating-point format `{other}`")),
        }
    }
}

/// Rounding mode. Round-to-nearest, ties-to-even is the only mode the
/// datapath implements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum RoundMode {
    #[default]
    Rne,
}

impl FromStr for RoundMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rne" => Ok(RoundMode::Rne),
            other => Err(format!("unsupported rounding mode `{other}` (only rne)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_widths() {
        assert_eq!((FpFormat::F32.exp_bits(), FpFormat::F32.sig_bits_stored()), (8, 23));
        assert_eq!((FpFormat::F16.exp_bits(), FpFormat::F16.sig_bits_stored()), (5, 10));
        assert_eq!((FpFormat::BF16.exp_bits(), FpFormat::BF16.sig_bits_stored()), (8, 7));
        for f in FpFormat::ALL {
            assert!(f.width() == 16 || f.width() == 32);
        }
    }

    #[test]
    fn special_encodings() {
        assert_eq!(FpFormat::F32.canonical_nan(), 0x7FC0_0000);
        assert_eq!(FpFormat::F16.canonical_nan(), 0x7E00);
        assert_eq!(FpFormat::BF16.canonical_nan(), 0x7FC0);
        assert_eq!(FpFormat::F16.infinity(true), 0xFC00);
        assert_eq!(FpFormat::BF16.infinity(false), 0x7F80);
        assert!(FpFormat::F16.is_nan(0x7C01));
        assert!(!FpFormat::F16.is_nan(0x7C00));
    }

    #[test]
    fn parse_names() {
        assert_eq!("bfloat16".parse::<FpFormat>().unwrap(), FpFormat::BF16);
        assert!("f64".parse::<FpFormat>().is_err());
        assert!("rtz".parse::<RoundMode>().is_err());
    }
}
