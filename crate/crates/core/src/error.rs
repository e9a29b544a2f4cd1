use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("shape error in {ctx}: {msg}")]
    Shape { ctx: String, msg: String },

    #[error("buffer capacity exceeded in {buffer}: need {needed} bytes, have {capacity}")]
    BufferCapacity {
        buffer: &'static str,
        needed: usize,
        capacity: usize,
    },

    #[error("weight bank mismatch: {0}")]
    Weights(String),
}

impl Error {
    pub fn shape(ctx: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Shape {
            ctx: ctx.into(),
            msg: msg.into(),
        }
    }
}
