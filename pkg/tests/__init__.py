"""Test suite for the ride-through boundary pipeline."""
