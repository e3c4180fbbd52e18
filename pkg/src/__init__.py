"""DHT-DAS Simulator - deterministic Kademlia DHT simulation for data availability sampling."""
