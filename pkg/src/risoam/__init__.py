"""Sum-rate maximization for RIS-assisted OAM multiuser downlinks."""
