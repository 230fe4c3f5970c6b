#![allow(dead_code)]

pub mod mock;
pub mod synth;

use std::time::Duration;

use sceneaug_core::backends::remote::{RemoteBackend, RemoteConfig, RetryPolicy};

/// Remote client with short backoff so retry tests stay fast.
pub fn fast_remote(url: &str) -> RemoteBackend {
    let mut config = RemoteConfig::new(url);
    config.retry = RetryPolicy {
        max_attempts: 3,
        base_delay: Duration::from_millis(5),
        factor: 2.0,
    };
    config.timeout = Duration::from_secs(20);
    RemoteBackend::new(config)
}
