// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(coherence_lab::cli::main_with_args(std::env::args_os()));
}
