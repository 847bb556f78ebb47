# Core modules

