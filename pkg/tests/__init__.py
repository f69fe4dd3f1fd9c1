"""Tests for the riskbias package."""
