use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

static STOP: AtomicBool = AtomicBool::new(false);

fn main() -> ExitCode {
    // A first Ctrl-C ends the run at the next step with partial outputs.
    if let Err(e) = ctrlc::set_handler(|| STOP.store(true, Ordering::Relaxed)) {
        eprintln!("warning: cannot install the interrupt handler: {e}");
    }
    magslam::cli::main_with(std::env::args_os(), &STOP)
}
