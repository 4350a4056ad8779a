use crate::geometry::Rect;

/// Union-find over component ids `1..=K` that also tracks each group's
/// members and bounding box.
#[derive(Debug, Clone)]
pub struct GroupState {
    parent: Vec<u32>,
    size: Vec<u32>,
    members: Vec<Vec<u32>>,
    bbox: Vec<Rect>,
}

impl GroupState {
    /// One singleton group per component; `bboxes[i]` belongs to id `i + 1`.
    pub fn new(bboxes: &[Rect]) -> Self {
        let k = bboxes.len();
        // slot 0 is unused so ids index directly
        let mut bbox = Vec::with_capacity(k + 1);
        bbox.push(Rect::new(0.0, 0.0, 0.0, 0.0));
        bbox.extend_from_slice(bboxes);
        Self {
            parent: (0..=k as u32).collect(),
            size: vec![1; k + 1],
            members: (0..=k as u32).map(|i| vec![i]).collect(),
            bbox,
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn find(&mut self, id: u32) -> u32 {
        let mut root = id;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = id;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    /// Merges the groups of `a` and `b`; returns false if already joined.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        let moved = std::mem::take(&mut self.members[rb as usize]);
        self.members[ra as usize].extend(moved);
        self.bbox[ra as usize] = self.bbox[ra as usize].union(&self.bbox[rb as usize]);
        true
    }

    /// Members of the group containing `id`, unsorted.
    pub fn members(&mut self, id: u32) -> &[u32] {
        let root = self.find(id);
        &self.members[root as usize]
    }

    pub fn bbox(&mut self, id: u32) -> Rect {
        let root = self.find(id);
        self.bbox[root as usize]
    }

    /// All groups as sorted member lists, ordered by smallest member.
    pub fn partition(&mut self) -> Vec<Vec<u32>> {
        let mut groups = Vec::new();
        for id in 1..=self.len() as u32 {
            if self.find(id) == id {
                let mut m = self.members[id as usize].clone();
                m.sort_unstable();
                groups.push(m);
            }
        }
        groups.sort();
        groups
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn members_and_bbox_follow_unions() {
        let boxes = [
            Rect::new(0.0, 0.0, 1.0, 1.0),
            Rect::new(5.0, 5.0, 6.0, 6.0),
            Rect::new(2.0, 9.0, 3.0, 10.0),
        ];
        let mut s = GroupState::new(&boxes);
        assert!(s.union(1, 2));
        assert!(!s.union(2, 1));
        assert!(s.union(3, 1));
        let mut m = s.members(2).to_vec();
        m.sort();
        assert_eq!(m, vec![1, 2, 3]);
        assert_eq!(s.bbox(3), Rect::new(0.0, 0.0, 6.0, 10.0));
        assert_eq!(s.partition(), vec![vec![1, 2, 3]]);
    }
}
