use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid receiver profile: {0}")]
    InvalidProfile(String),

    #[error("frame must contain at least one packet")]
    EmptyFrame,

    #[error("at least one receiver is required")]
    NoReceivers,

    #[error("receiver {receiver} out of range (M = {receivers})")]
    ReceiverOutOfRange { receiver: usize, receivers: usize },

    #[error("packet {packet} out of range (N = {packets})")]
    PacketOutOfRange { packet: usize, packets: usize },

    #[error("receiver {receiver} already has packet {packet}")]
    AlreadyHas { receiver: usize, packet: usize },

    #[error("receiver {0} targeted more than once")]
    DuplicateTarget(usize),

    #[error("{targets} targets but {outcomes} reception outcomes")]
    OutcomeMismatch { targets: usize, outcomes: usize },

    #[error("receiver {0} has zero success probability")]
    ZeroSuccessProbability(usize),

    #[error("invalid feedback matrix: {0}")]
    InvalidMatrix(String),

    #[error("vertices {0} and {1} are not adjacent")]
    NotAClique(usize, usize),

    #[error("transmission not instantly decodable at receiver {receiver}: {unknown} unknown packets")]
    NotDecodable { receiver: usize, unknown: usize },

    #[error("graph has no primary vertices")]
    EmptyGraph,

    #[error("empty clique has no transmission")]
    EmptyClique,

    #[error("size bound exceeded: {size} > {bound}")]
    SizeBoundExceeded { size: usize, bound: usize },

    #[error("clique search exceeded its budget of {0} expanded nodes")]
    SearchBudgetExceeded(u64),

    #[error("invalid cardinalities: {0}")]
    InvalidCardinalities(String),

    #[error("target sets overlap at receiver {0}")]
    OverlappingTargets(usize),

    #[error("formula requires N >= 2, got N = {0}")]
    FrameTooSmall(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("perfect RNC baseline is defined for broadcast only")]
    NotBroadcast,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown policy {0:?}")]
    UnknownPolicy(String),

    #[error("state not present in value table")]
    UnknownState,
}
