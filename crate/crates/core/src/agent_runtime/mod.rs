//! Topic-based publish/subscribe bus, agents that run on it, a TCP hub for
//! remote agents and the exam pipeline built from five agents.

mod agent;
mod bus;
mod codec;
pub mod pipeline;
mod tcp;
mod topic;

pub use agent::{spawn_agent, AgentDescriptor, AgentHandle, Handler, Outgoing};
pub use bus::{Bus, Receipt, Subscription, ANNOUNCE_TOPIC, BUS_SENDER, DEFAULT_QUEUE_CAPACITY, ERRORS_TOPIC};
pub use codec::{decode_frame, encode_body, encode_frame, read_frame, write_frame, Message, MAX_FRAME_BYTES};
pub use pipeline::{
    pipeline_agents, reply_topic, request, run_pipeline, run_remote_pipeline, ExamRequest, IngestRequest, KgQuery,
    Pipeline, PipelineConfig, PipelineGenerator, Reply,
};
pub use tcp::{spawn_remote_agent, Announce, RemoteClient, TcpHub, HUB_SENDER};
pub use topic::{validate_topic, TopicPattern};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BusError {
    #[error("cannot publish to wildcard topic `{0}`")]
    WildcardPublish(String),
    #[error("malformed topic `{0}`")]
    BadTopic(String),
    #[error("malformed subscription pattern `{0}`")]
    BadPattern(String),
    #[error("bus is closed")]
    BusClosed,
    #[error("agent name `{0}` is already in use")]
    DuplicateName(String),
    #[error("invalid agent: {0}")]
    InvalidAgent(String),
    #[error("frame of {0} bytes exceeds the 16 MiB limit")]
    FrameTooLarge(usize),
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("hub rejected the connection ({code}): {message}")]
    Remote { code: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl BusError {
    pub fn code(&self) -> &'static str {
        match self {
            BusError::WildcardPublish(_) => "WildcardPublish",
            BusError::BadTopic(_) => "BadTopic",
            BusError::BadPattern(_) => "BadPattern",
            BusError::BusClosed => "BusClosed",
            BusError::DuplicateName(_) => "DuplicateName",
            BusError::InvalidAgent(_) => "InvalidAgent",
            BusError::FrameTooLarge(_) => "FrameTooLarge",
            BusError::MalformedFrame(_) => "MalformedFrame",
            BusError::Timeout(_) => "Timeout",
            BusError::Remote { .. } => "RemoteError",
            BusError::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for BusError {
    fn from(e: std::io::Error) -> Self {
        BusError::Io(e.to_string())
    }
}
