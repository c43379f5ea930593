use bitflags::bitflags;

bitflags! {
    /// Status bits shared by packets, frames and correction records.
    /// An empty set means OK.
    #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
    pub struct Flags: u32 {
        const ERASURE = 1 << 0;
        const CORRUPT = 1 << 1;
        const DESYNC = 1 << 2;
        const STALE = 1 << 3;
        const OVERFLOW = 1 << 4;
        const FATAL = 1 << 5;
    }
}

impl Flags {
    pub const OK: Flags = Flags::empty();

    pub fn is_ok(self) -> bool {
        self.is_empty()
    }

    /// Names of the set bits, `OK` when none are set.
    pub fn describe(self) -> String {
        if self.is_empty() {
            return "OK".to_string();
        }
        self.iter_names()
            .map(|(n, _)| n)
            .collect::<Vec<_>>()
            .join("|")
    }
}
