use std::fmt;

/// A user identity. Users are numbered `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserId(pub u32);

impl UserId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartyId {
    Server,
    User(UserId),
}

impl PartyId {
    /// Stable 32-bit wire id: users keep their number, the server is `u32::MAX`.
    pub fn wire_id(self) -> u32 {
        match self {
            PartyId::Server => u32::MAX,
            PartyId::User(u) => u.0,
        }
    }

    pub fn user(self) -> Option<UserId> {
        match self {
            PartyId::User(u) => Some(u),
            PartyId::Server => None,
        }
    }
}

impl From<UserId> for PartyId {
    fn from(u: UserId) -> Self {
        PartyId::User(u)
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyId::Server => write!(f, "server"),
            PartyId::User(u) => write!(f, "{u}"),
        }
    }
}
